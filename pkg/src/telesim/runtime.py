"""Wires stores, personas, providers, and sessions into one platform object.

Also materializes the packaged fixture workspace (two personas with
placeholder media) so demos, benchmarks, and tests run with zero setup.
"""

from __future__ import annotations

import logging
import shutil
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .assets import AssetStore
from .config import AppConfig
from .persona import (
    PatientProfile,
    RolePlayInstructions,
    ValidationReport,
    default_instructions,
    load_instructions,
    parse_profile,
)
from .errors import ProfileParseError
from .providers import ProviderSet
from .session import SessionManager, SessionStore

logger = logging.getLogger(__name__)


class PersonaRegistry:
    """All personas found in a directory, valid or not.

    Invalid personas stay listed internally (so session creation can
    reject them by name) but are excluded from learner-facing summaries.
    """

    def __init__(self):
        self._entries: dict[str, tuple[PatientProfile, ValidationReport]] = {}

    @classmethod
    def from_dir(cls, personas_dir: Path) -> "PersonaRegistry":
        registry = cls()
        if personas_dir.exists():
            for path in sorted(personas_dir.glob("*.json")):
                registry.add_document(path)
        return registry

    def add_document(self, path: Path):
        try:
            profile, report = parse_profile(path.read_bytes())
        except ProfileParseError as exc:
            logger.warning("skipping unparseable persona file %s: %s", path.name, exc)
            return
        if not profile.id:
            logger.warning("skipping persona file %s: no id", path.name)
            return
        if not report.ok:
            logger.warning(
                "persona %r fails validation and will not be playable: %s",
                profile.id,
                "; ".join(f"{i.field_path}: {i.message}" for i in report.errors()),
            )
        self._entries[profile.id] = (profile, report)

    def add(self, profile: PatientProfile, report: ValidationReport):
        self._entries[profile.id] = (profile, report)

    def get(self, persona_id: str):
        entry = self._entries.get(persona_id)
        if entry is None:
            return None, None
        return entry

    def list_valid(self) -> list[PatientProfile]:
        return [p for p, r in self._entries.values() if r.ok]

    def __len__(self) -> int:
        return len(self._entries)


@dataclass
class Platform:
    config: AppConfig
    store: AssetStore
    registry: PersonaRegistry
    providers: ProviderSet
    instructions: RolePlayInstructions
    sessions: SessionManager


def build_platform(config: AppConfig, load_persisted: bool = False) -> Platform:
    store = AssetStore(config.store_root, clip_budget_bytes=config.clip_cache_budget_bytes)
    registry = PersonaRegistry.from_dir(config.personas_dir)
    providers = ProviderSet.from_configs(config.providers)
    if config.instructions_file is not None:
        instructions = load_instructions(config.instructions_file.read_bytes())
    else:
        instructions = default_instructions()
    manager = SessionManager(
        registry=registry,
        store=store,
        providers=providers,
        instructions=instructions,
        session_store=SessionStore(config.sessions_root),
        dialogue_params=config.dialogue_params,
    )
    if load_persisted:
        manager.load_persisted()
    return Platform(
        config=config,
        store=store,
        registry=registry,
        providers=providers,
        instructions=instructions,
        sessions=manager,
    )


def materialize_fixtures(workspace: Path) -> AppConfig:
    """Copy the packaged fixture personas into a workspace and register
    their media, returning a ready-to-build config rooted there."""
    personas_dir = workspace / "personas"
    personas_dir.mkdir(parents=True, exist_ok=True)
    fixture_root = resources.files("telesim").joinpath("data/fixtures")

    for entry in fixture_root.joinpath("personas").iterdir():
        if entry.name.endswith(".json"):
            shutil.copyfile(str(entry), personas_dir / entry.name)

    config = AppConfig(data_root=workspace / "data", personas_dir=personas_dir)
    store = AssetStore(config.store_root)
    for entry in fixture_root.joinpath("voices").iterdir():
        if entry.name.endswith(".json"):
            store.register_voice_file(Path(str(entry)))
    for entry in fixture_root.joinpath("media").iterdir():
        if entry.name.endswith(".bin"):
            base_id = entry.name[: -len(".bin")]
            store.register_base_video(
                entry.read_bytes(),
                base_video_id=base_id,
                duration_ms=4000.0,
                loopable=True,
                content_type="application/octet-stream",
            )
    return config
