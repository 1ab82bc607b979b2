"""Patient personas: declarative profiles rendered into dialogue prompts.

A profile is authored as one UTF-8 JSON document (see
``data/schemas/patient_profile.schema.json``). At runtime it is combined
with a versioned role-play instruction set into a single system prompt;
the rendering is canonical so that equal inputs always produce
byte-identical prompt text.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
from dataclasses import dataclass, field, asdict
from importlib import resources

from .errors import ProfileParseError, ProfileValidationError

logger = logging.getLogger(__name__)

ID_PATTERN = re.compile(r"^[a-z0-9-]{1,64}$")
MAX_TEXT_FIELD_BYTES = 8 * 1024
MAX_TRAIT_CHARS = 200
MAX_AGE = 130

# Profile sections rendered into the prompt, in canonical order.
SECTION_ORDER = (
    "scenario",
    "medical_history",
    "disease_onset",
    "healthcare_experience",
    "belief_system",
    "disease_understanding",
    "personality_traits",
    "demographics",
)

SECTION_LABELS = {
    "scenario": "Scenario",
    "medical_history": "Medical history",
    "disease_onset": "Disease onset",
    "healthcare_experience": "Healthcare experience",
    "belief_system": "Belief system",
    "disease_understanding": "Understanding of the disease",
    "personality_traits": "Personality traits",
    "demographics": "Demographics",
}

PROFILE_HEADER = "Patient profile"

_FREE_TEXT_FIELDS = (
    "scenario",
    "medical_history",
    "disease_onset",
    "healthcare_experience",
    "belief_system",
    "disease_understanding",
)

_REQUIRED_TEXT_FIELDS = ("scenario", "belief_system", "disease_understanding")

_KNOWN_KEYS = {
    "id",
    "display_name",
    "demographics",
    "scenario",
    "medical_history",
    "disease_onset",
    "healthcare_experience",
    "belief_system",
    "disease_understanding",
    "personality_traits",
    "voice_id",
    "base_video_id",
}

_KNOWN_DEMOGRAPHIC_KEYS = {"age", "pronouns", "occupation"}


@dataclass(frozen=True)
class Demographics:
    age: int
    pronouns: str
    occupation: str


@dataclass(frozen=True)
class PatientProfile:
    id: str
    display_name: str
    demographics: Demographics
    scenario: str
    medical_history: str
    disease_onset: str
    healthcare_experience: str
    belief_system: str
    disease_understanding: str
    personality_traits: tuple[str, ...]
    voice_id: str
    base_video_id: str


@dataclass(frozen=True)
class RolePlayInstructions:
    """Shared system directives combined with every profile."""

    version: str
    body: str
    guardrails: tuple[str, ...] = ()


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    profile_id: str
    instructions_version: str
    content_hash: str


@dataclass(frozen=True)
class Issue:
    field_path: str
    message: str
    severity: str  # "error" | "warning"


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...]

    @property
    def ok(self) -> bool:
        return not any(i.severity == "error" for i in self.issues)

    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]


def validate_profile(profile: PatientProfile) -> ValidationReport:
    """Check every profile invariant; one issue per violated rule.

    Asset references (voice_id, base_video_id) are only checked for
    presence here; whether they resolve is decided against the asset
    store at session-creation time.
    """
    issues: list[Issue] = []

    if not ID_PATTERN.match(profile.id or ""):
        issues.append(Issue("id", "must match [a-z0-9-]{1,64}", "error"))
    if not (profile.display_name or "").strip():
        issues.append(Issue("display_name", "must not be empty", "error"))

    for name in _REQUIRED_TEXT_FIELDS:
        if not (getattr(profile, name) or "").strip():
            issues.append(Issue(name, "must not be empty", "error"))

    for name in _FREE_TEXT_FIELDS:
        value = getattr(profile, name) or ""
        if len(value.encode("utf-8")) > MAX_TEXT_FIELD_BYTES:
            issues.append(Issue(name, f"exceeds {MAX_TEXT_FIELD_BYTES} bytes", "error"))

    if not profile.personality_traits:
        issues.append(Issue("personality_traits", "must not be empty", "error"))
    else:
        for i, trait in enumerate(profile.personality_traits):
            if not trait.strip():
                issues.append(Issue(f"personality_traits[{i}]", "must not be empty", "error"))
            elif "\n" in trait or len(trait) > MAX_TRAIT_CHARS:
                issues.append(
                    Issue(f"personality_traits[{i}]", "must be a short single-line string", "error")
                )

    if not isinstance(profile.demographics.age, int) or isinstance(profile.demographics.age, bool):
        issues.append(Issue("demographics.age", "must be an integer number of years", "error"))
    elif not 0 <= profile.demographics.age <= MAX_AGE:
        issues.append(Issue("demographics.age", f"must be between 0 and {MAX_AGE}", "error"))

    if not (profile.voice_id or "").strip():
        issues.append(Issue("voice_id", "must reference a registered voice", "error"))
    if not (profile.base_video_id or "").strip():
        issues.append(Issue("base_video_id", "must reference a registered base video", "error"))

    return ValidationReport(issues=tuple(issues))


def _render_section(name: str, profile: PatientProfile) -> str | None:
    label = SECTION_LABELS[name]
    if name == "personality_traits":
        if not profile.personality_traits:
            return None
        lines = "\n".join(f"- {t}" for t in profile.personality_traits)
        return f"{label}:\n{lines}"
    if name == "demographics":
        demo = profile.demographics
        return (
            f"{label}:\n"
            f"Age: {demo.age}\n"
            f"Pronouns: {demo.pronouns}\n"
            f"Occupation: {demo.occupation}"
        )
    value = getattr(profile, name)
    if not value:
        return None
    return f"{label}:\n{value}"


def assemble_prompt(profile: PatientProfile, instructions: RolePlayInstructions) -> PromptBundle:
    """Render instructions + profile into the canonical system prompt.

    Layout: instruction body, guardrail list, then the labeled profile
    sections in SECTION_ORDER. Pure function: equal inputs yield
    byte-identical text, hence identical content hashes.
    """
    report = validate_profile(profile)
    if not report.ok:
        raise ProfileValidationError(
            f"profile {profile.id!r} fails validation: "
            + "; ".join(f"{i.field_path}: {i.message}" for i in report.errors()),
            report=report,
        )

    parts = [instructions.body.rstrip("\n")]
    if instructions.guardrails:
        parts.append("Guardrails:\n" + "\n".join(f"- {g}" for g in instructions.guardrails))
    parts.append(f"{PROFILE_HEADER}: {profile.display_name}")
    for name in SECTION_ORDER:
        section = _render_section(name, profile)
        if section is not None:
            parts.append(section)

    system_text = "\n\n".join(parts) + "\n"
    content_hash = hashlib.sha256(system_text.encode("utf-8")).hexdigest()
    return PromptBundle(
        system_text=system_text,
        profile_id=profile.id,
        instructions_version=instructions.version,
        content_hash=content_hash,
    )


def extract_prompt_fields(system_text: str) -> dict[str, str]:
    """Recover the display name and section texts from a rendered prompt.

    Used by the offline dialogue binding, which receives only the prompt
    bundle and must stay persona-flavored without access to the profile.
    """
    fields: dict[str, str] = {}
    match = re.search(rf"^{PROFILE_HEADER}: (.+)$", system_text, re.MULTILINE)
    if match:
        fields["display_name"] = match.group(1).strip()

    labels = {label: name for name, label in SECTION_LABELS.items()}
    pattern = re.compile(
        r"^(" + "|".join(re.escape(lbl) for lbl in labels) + r"):\n", re.MULTILINE
    )
    matches = list(pattern.finditer(system_text))
    for i, m in enumerate(matches):
        start = m.end()
        end = matches[i + 1].start() if i + 1 < len(matches) else len(system_text)
        fields[labels[m.group(1)]] = system_text[start:end].strip()
    return fields


# --- persona file format -------------------------------------------------------


def parse_profile(document: bytes) -> tuple[PatientProfile, ValidationReport]:
    """Parse a persona document leniently.

    Returns the profile (fields defaulted where absent) together with a
    report holding one issue per violated invariant plus a warning per
    unknown field. Raises ProfileParseError only when the document is not
    a JSON object at all.
    """
    try:
        text = document.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ProfileParseError(f"not UTF-8: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ProfileParseError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(raw, dict):
        raise ProfileParseError("persona document must be a JSON object")

    issues: list[Issue] = []

    def text_field(name: str) -> str:
        value = raw.get(name, "")
        if value is None:
            return ""
        if not isinstance(value, str):
            issues.append(Issue(name, "must be a string", "error"))
            return ""
        return value

    for key in sorted(set(raw) - _KNOWN_KEYS):
        issues.append(Issue(key, "unknown field ignored", "warning"))
        logger.warning("persona document: unknown field %r ignored", key)

    demo_raw = raw.get("demographics", {})
    if not isinstance(demo_raw, dict):
        issues.append(Issue("demographics", "must be an object", "error"))
        demo_raw = {}
    for key in sorted(set(demo_raw) - _KNOWN_DEMOGRAPHIC_KEYS):
        issues.append(Issue(f"demographics.{key}", "unknown field ignored", "warning"))
        logger.warning("persona document: unknown field %r ignored", f"demographics.{key}")

    age = demo_raw.get("age", -1)
    if not isinstance(age, int) or isinstance(age, bool):
        # keep the sentinel; validate_profile reports the type error once
        age = -1
    demographics = Demographics(
        age=age,
        pronouns=str(demo_raw.get("pronouns", "") or ""),
        occupation=str(demo_raw.get("occupation", "") or ""),
    )

    traits_raw = raw.get("personality_traits", [])
    if not isinstance(traits_raw, list) or not all(isinstance(t, str) for t in traits_raw):
        issues.append(Issue("personality_traits", "must be a list of strings", "error"))
        traits_raw = []

    profile = PatientProfile(
        id=text_field("id"),
        display_name=text_field("display_name"),
        demographics=demographics,
        scenario=text_field("scenario"),
        medical_history=text_field("medical_history"),
        disease_onset=text_field("disease_onset"),
        healthcare_experience=text_field("healthcare_experience"),
        belief_system=text_field("belief_system"),
        disease_understanding=text_field("disease_understanding"),
        personality_traits=tuple(traits_raw),
        voice_id=text_field("voice_id"),
        base_video_id=text_field("base_video_id"),
    )

    report = validate_profile(profile)
    return profile, ValidationReport(issues=tuple(issues) + report.issues)


def load_profile(document: bytes) -> PatientProfile:
    """Parse and validate a persona document, raising on any error issue."""
    profile, report = parse_profile(document)
    if not report.ok:
        raise ProfileValidationError(
            "invalid persona: "
            + "; ".join(f"{i.field_path}: {i.message}" for i in report.errors()),
            report=report,
        )
    return profile


def serialize_profile(profile: PatientProfile) -> bytes:
    """Render a profile back to its canonical document form.

    ``parse_profile(serialize_profile(p))`` yields a profile equal to ``p``.
    """
    doc = {
        "id": profile.id,
        "display_name": profile.display_name,
        "demographics": asdict(profile.demographics),
        "scenario": profile.scenario,
        "medical_history": profile.medical_history,
        "disease_onset": profile.disease_onset,
        "healthcare_experience": profile.healthcare_experience,
        "belief_system": profile.belief_system,
        "disease_understanding": profile.disease_understanding,
        "personality_traits": list(profile.personality_traits),
        "voice_id": profile.voice_id,
        "base_video_id": profile.base_video_id,
    }
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def load_instructions(document: bytes) -> RolePlayInstructions:
    """Load a versioned instruction set (JSON: version, body, guardrails)."""
    try:
        raw = json.loads(document.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProfileParseError(f"invalid instruction file: {exc}") from exc
    version = raw.get("version", "")
    body = raw.get("body", "")
    if not version or not body:
        raise ProfileParseError("instruction file needs nonempty 'version' and 'body'")
    return RolePlayInstructions(
        version=version,
        body=body,
        guardrails=tuple(raw.get("guardrails", [])),
    )


def default_instructions() -> RolePlayInstructions:
    """The instruction set shipped with the package."""
    data = (
        resources.files("telesim")
        .joinpath("data/instructions/default_instructions_v1.json")
        .read_bytes()
    )
    return load_instructions(data)
