import hashlib
import json
from dataclasses import replace

import pytest
from hypothesis import given, strategies as st

from telesim.errors import ProfileParseError, ProfileValidationError
from telesim.persona import (
    Demographics,
    PatientProfile,
    RolePlayInstructions,
    SECTION_LABELS,
    SECTION_ORDER,
    assemble_prompt,
    extract_prompt_fields,
    load_profile,
    parse_profile,
    serialize_profile,
    validate_profile,
)


def make_profile(**overrides) -> PatientProfile:
    base = dict(
        id="test-patient",
        display_name="Test Patient",
        demographics=Demographics(age=50, pronouns="they/them", occupation="carpenter"),
        scenario="A routine follow-up that must turn into a difficult conversation.",
        medical_history="Longstanding hypertension.",
        disease_onset="Symptoms began last spring.",
        healthcare_experience="Rarely sees a doctor.",
        belief_system="Pragmatic; trusts evidence but fears hospitals.",
        disease_understanding="Thinks the illness is temporary. Hopes it will pass.",
        personality_traits=("stoic", "skeptical of doctors"),
        voice_id="voice-1",
        base_video_id="video-1",
    )
    base.update(overrides)
    return PatientProfile(**base)


SIMPLE_INSTRUCTIONS = RolePlayInstructions(
    version="test-v1",
    body="Role-play the patient described below.",
    guardrails=("Stay in character.", "Stay inside the scenario."),
)


class TestValidateProfile:
    def test_complete_profile_is_ok(self):
        report = validate_profile(make_profile())
        assert report.ok
        assert report.issues == ()

    def test_empty_belief_system_is_single_error_at_path(self):
        report = validate_profile(make_profile(belief_system=""))
        assert not report.ok
        errors = report.errors()
        assert len(errors) == 1
        assert errors[0].field_path == "belief_system"

    def test_bad_slug_rejected(self):
        # "Mr. Jones!" has uppercase, dot, space, and bang: all outside [a-z0-9-]
        report = validate_profile(make_profile(id="Mr. Jones!"))
        assert not report.ok
        assert [i.field_path for i in report.errors()] == ["id"]

    @pytest.mark.parametrize(
        "bad_id", ["", "UPPER", "has space", "ünïcode", "x" * 65, "semi;colon"]
    )
    def test_slug_rule_matches_documented_pattern(self, bad_id):
        import re

        # independent check of the same pattern the docs publish
        assert re.fullmatch(r"[a-z0-9-]{1,64}", bad_id) is None
        assert not validate_profile(make_profile(id=bad_id)).ok

    @pytest.mark.parametrize("good_id", ["a", "maria-gonzalez", "x9", "a" * 64])
    def test_valid_slugs_pass(self, good_id):
        assert validate_profile(make_profile(id=good_id)).ok

    def test_issue_count_equals_violated_rules(self):
        profile = make_profile(
            id="BAD ID", belief_system="", scenario="", personality_traits=()
        )
        report = validate_profile(profile)
        assert len(report.errors()) == 4

    def test_oversized_field_rejected(self):
        report = validate_profile(make_profile(medical_history="x" * 9000))
        assert [i.field_path for i in report.errors()] == ["medical_history"]

    def test_age_bounds(self):
        assert not validate_profile(
            make_profile(demographics=Demographics(age=-1, pronouns="", occupation=""))
        ).ok
        assert not validate_profile(
            make_profile(demographics=Demographics(age=131, pronouns="", occupation=""))
        ).ok

    def test_validate_does_not_mutate(self):
        profile = make_profile()
        snapshot = serialize_profile(profile)
        validate_profile(profile)
        assert serialize_profile(profile) == snapshot


class TestAssemblePrompt:
    def test_sections_appear_in_canonical_order(self):
        bundle = assemble_prompt(make_profile(), SIMPLE_INSTRUCTIONS)
        positions = [
            bundle.system_text.index(f"{SECTION_LABELS[name]}:") for name in SECTION_ORDER
        ]
        assert positions == sorted(positions)
        assert bundle.system_text.startswith(SIMPLE_INSTRUCTIONS.body)

    def test_deterministic_hash(self):
        a = assemble_prompt(make_profile(), SIMPLE_INSTRUCTIONS)
        b = assemble_prompt(make_profile(), SIMPLE_INSTRUCTIONS)
        assert a.system_text == b.system_text
        assert a.content_hash == b.content_hash

    def test_content_hash_recomputes_from_system_text(self):
        bundle = assemble_prompt(make_profile(), SIMPLE_INSTRUCTIONS)
        assert bundle.content_hash == hashlib.sha256(
            bundle.system_text.encode("utf-8")
        ).hexdigest()

    def test_personality_traits_appear_verbatim(self):
        bundle = assemble_prompt(make_profile(), SIMPLE_INSTRUCTIONS)
        assert "stoic" in bundle.system_text
        assert "skeptical of doctors" in bundle.system_text

    def test_guardrails_rendered(self):
        bundle = assemble_prompt(make_profile(), SIMPLE_INSTRUCTIONS)
        assert "- Stay in character." in bundle.system_text

    def test_invalid_profile_rejected(self):
        with pytest.raises(ProfileValidationError):
            assemble_prompt(make_profile(belief_system=""), SIMPLE_INSTRUCTIONS)

    def test_empty_optional_sections_are_omitted(self):
        profile = make_profile(medical_history="", disease_onset="")
        bundle = assemble_prompt(profile, SIMPLE_INSTRUCTIONS)
        assert f"{SECTION_LABELS['medical_history']}:" not in bundle.system_text
        assert f"{SECTION_LABELS['disease_onset']}:" not in bundle.system_text

    @given(st.data())
    def test_every_field_appears_exactly_once(self, data):
        # distinct tagged values cannot be substrings of one another
        def token(tag):
            suffix = data.draw(st.text(alphabet="abcdefghij", min_size=5, max_size=12))
            return f"{tag}.{suffix}"

        profile = make_profile(
            scenario=token("scn"),
            medical_history=token("mhx"),
            disease_onset=token("ons"),
            healthcare_experience=token("exp"),
            belief_system=token("bel"),
            disease_understanding=token("und"),
            personality_traits=(token("tr1"), token("tr2")),
        )
        text = assemble_prompt(profile, SIMPLE_INSTRUCTIONS).system_text
        for value in (
            profile.scenario,
            profile.medical_history,
            profile.disease_onset,
            profile.healthcare_experience,
            profile.belief_system,
            profile.disease_understanding,
            *profile.personality_traits,
        ):
            assert text.count(value) == 1

    def test_extract_prompt_fields_recovers_sections(self):
        profile = make_profile()
        bundle = assemble_prompt(profile, SIMPLE_INSTRUCTIONS)
        fields = extract_prompt_fields(bundle.system_text)
        assert fields["display_name"] == "Test Patient"
        assert fields["scenario"] == profile.scenario
        assert fields["disease_understanding"] == profile.disease_understanding


class TestDocumentFormat:
    def test_roundtrip_identity(self, maria_profile):
        doc = serialize_profile(maria_profile)
        assert load_profile(doc) == maria_profile

    def test_fixture_loads_equal_to_inline_construction(self):
        profile = make_profile()
        assert load_profile(serialize_profile(profile)) == profile

    def test_missing_scenario_names_field(self):
        doc = json.loads(serialize_profile(make_profile()))
        del doc["scenario"]
        with pytest.raises(ProfileValidationError) as err:
            load_profile(json.dumps(doc).encode())
        assert "scenario" in str(err.value)

    def test_unknown_field_warns_but_loads(self, caplog):
        doc = json.loads(serialize_profile(make_profile()))
        doc["favorite_color"] = "blue"
        profile, report = parse_profile(json.dumps(doc).encode())
        assert report.ok
        warnings = [i for i in report.issues if i.severity == "warning"]
        assert [w.field_path for w in warnings] == ["favorite_color"]
        assert profile == make_profile()
        assert any("favorite_color" in r.message for r in caplog.records)

    def test_malformed_json_is_parse_error_with_line(self):
        with pytest.raises(ProfileParseError) as err:
            load_profile(b'{"id": "x",\n  broken')
        assert "line" in str(err.value)

    def test_non_object_document_rejected(self):
        with pytest.raises(ProfileParseError):
            load_profile(b'["not", "an", "object"]')

    def test_non_utf8_rejected(self):
        with pytest.raises(ProfileParseError):
            load_profile(b"\xff\xfe{}")

    def test_wrong_type_fields_are_validation_errors(self):
        doc = json.loads(serialize_profile(make_profile()))
        doc["personality_traits"] = "stoic"
        _, report = parse_profile(json.dumps(doc).encode())
        assert not report.ok
        assert "personality_traits" in [i.field_path for i in report.errors()]


class TestInstructions:
    def test_default_instructions_have_guardrails(self, instructions):
        assert instructions.version
        assert instructions.body
        assert len(instructions.guardrails) >= 3
        # the guardrails must pin the conversation to the scenario
        joined = " ".join(instructions.guardrails).lower()
        assert "scenario" in joined or "character" in joined

    def test_fixture_personas_validate(self, maria_profile):
        assert validate_profile(maria_profile).ok
