"""Acceptance gate: one test per pinned criterion, each printing a
pass/fail line in the terminal summary.

Criteria 1-8 cover the primary component and run fully offline with no
credentials. Criterion 9 (the web console) lives in frontend/tests and
runs against this package's gateway.
"""

import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor

import httpx
import pytest
from click.testing import CliRunner
from starlette.testclient import TestClient

from telesim.assets import AssetStore
from telesim.cli import main
from telesim.gateway import create_app
from telesim.providers import ProviderSet
from telesim.providers.base import ProviderConfig, VoiceParams
from telesim.providers.remote import RemoteDialogue
from telesim.providers.simulated import SimulatedLipsync
from telesim.persona import assemble_prompt
from telesim.runtime import build_platform, materialize_fixtures

from conftest import record_criterion
from test_persona import SIMPLE_INSTRUCTIONS, make_profile

FAKE_SECRET = "sk-telesim-acceptance-3f2c9d8e7b6a"
FAKE_SECRET_ENV = "TELESIM_ACCEPTANCE_KEY"

# Everything the criteria runs emit (CLI output, HTTP bodies, log lines)
# lands here; criterion 8 scans it for the planted secret.
SCANNED_OUTPUT: list[str] = []

CANONICAL_TEXT_STAGES = ["received", "thinking", "synthesizing", "rendering", "ready"]

_demo_cache: dict = {}


@pytest.fixture(scope="module", autouse=True)
def _capture_everything():
    collector = logging.Handler()
    records: list[str] = []

    def emit(record):
        records.append(record.getMessage())

    collector.emit = emit
    root = logging.getLogger()
    root.addHandler(collector)
    previous_level = root.level
    root.setLevel(logging.DEBUG)
    yield
    root.removeHandler(collector)
    root.setLevel(previous_level)
    SCANNED_OUTPUT.extend(records)


@pytest.fixture(scope="module", autouse=True)
def _fake_secret_env():
    import os

    os.environ[FAKE_SECRET_ENV] = FAKE_SECRET
    yield
    os.environ.pop(FAKE_SECRET_ENV, None)


def run_demo_five_lines() -> dict:
    """`demo --offline` with a 5-line script; cached so criteria 1 and 7
    measure the same run."""
    if "payload" in _demo_cache:
        return _demo_cache["payload"]
    runner = CliRunner()
    import tempfile

    with tempfile.NamedTemporaryFile("w", suffix=".txt", delete=False) as f:
        f.write(
            "When can I go home?\n"
            "What does this diagnosis mean for me?\n"
            "Are you in pain right now?\n"
            "Who should be part of these decisions?\n"
            "What matters most to you going forward?\n"
        )
        script = f.name
    t0 = time.monotonic()
    result = runner.invoke(
        main,
        ["demo", "--offline", "--persona", "maria-gonzalez", "--script", script, "--json"],
    )
    wall_s = time.monotonic() - t0
    SCANNED_OUTPUT.append(result.output)
    payload = json.loads(result.output)
    _demo_cache["payload"] = payload
    _demo_cache["wall_s"] = wall_s
    _demo_cache["exit_code"] = result.exit_code
    return payload


def test_criterion_1_offline_end_to_end():
    payload = run_demo_five_lines()
    assert _demo_cache["exit_code"] == 0
    assert payload["ok"] is True
    assert len(payload["turns"]) == 5
    assert [t["index"] for t in payload["turns"]] == [0, 1, 2, 3, 4]
    for turn in payload["turns"]:
        assert turn["status"] == "ok"
        assert turn["stages"] == CANONICAL_TEXT_STAGES
    assert _demo_cache["wall_s"] < 5.0
    record_criterion(
        "criterion-1 offline end-to-end",
        f"5 turns, canonical order, wall {_demo_cache['wall_s']:.2f}s < 5s, exit 0",
    )


def test_criterion_2_determinism(tmp_path):
    runner = CliRunner()
    config = materialize_fixtures(tmp_path / "ws")
    persona_file = str(config.personas_dir / "maria-gonzalez.json")

    first = runner.invoke(main, ["persona", "render-prompt", persona_file])
    second = runner.invoke(main, ["persona", "render-prompt", persona_file])
    SCANNED_OUTPUT.append(first.output)
    assert first.exit_code == second.exit_code == 0
    assert first.output == second.output and len(first.output) > 100

    # identical offline text turns with the clip cache cleared in between
    platform = build_platform(config)
    manager = platform.sessions
    session = manager.create_session("maria-gonzalez")
    job1 = manager.submit_turn(session.session_id, text="Will this treatment cure me?")
    clip_a = manager.wait_for_turn(session.session_id, job1).clip_id
    platform.store.clear_clip_cache()
    job2 = manager.submit_turn(session.session_id, text="Will this treatment cure me?")
    result_b = manager.wait_for_turn(session.session_id, job2)
    assert result_b.cache_hit is False  # the cache really was cold
    assert result_b.clip_id == clip_a
    record_criterion(
        "criterion-2 determinism",
        "byte-identical prompt renders; identical cold-cache turns share one clip id",
    )


def test_criterion_3_latency_reproduction():
    # five simulated turns at 20-30 s render delay: ~2 minutes of real time
    runner = CliRunner()
    result = runner.invoke(
        main,
        ["bench", "--turns", "5", "--render-delay-ms", "20000:30000", "--json"],
    )
    SCANNED_OUTPUT.append(result.output)
    assert result.exit_code == 0, result.output
    payload = json.loads(result.output)
    report = payload["report"]
    assert report["dominant_stage"] == "rendering"
    render_share = report["stages"]["rendering"]["mean_ms"] / report["mean_total_ms"]
    assert render_share >= 0.80
    for row in payload["turns"]:
        assert 20_000 <= row["total_ms"] <= 33_000
    record_criterion(
        "criterion-3 latency reproduction",
        f"dominant=rendering, render share {render_share:.3f} >= 0.8, "
        f"totals within [20s, 33s]",
    )


def test_criterion_4_text_only_fallback(tmp_path):
    config = materialize_fixtures(tmp_path / "text-only")
    platform = build_platform(config)
    platform.providers.transcriber = None
    platform.sessions.pipeline.providers = platform.providers
    from telesim.audio import sine_wave
    import io

    with TestClient(create_app(platform)) as client:
        session = client.post("/api/sessions", json={"persona_id": "maria-gonzalez"})
        SCANNED_OUTPUT.append(session.text)
        session_id = session.json()["session_id"]
        assert session.json()["text_only"] is True

        text_turn = client.post(
            f"/api/sessions/{session_id}/turns", json={"text": "typed question"}
        )
        SCANNED_OUTPUT.append(text_turn.text)
        assert text_turn.status_code == 202
        platform.sessions.wait_for_turn(session_id, text_turn.json()["job_id"])
        transcript = client.get(f"/api/sessions/{session_id}/transcript")
        SCANNED_OUTPUT.append(transcript.text)
        turn = transcript.json()["turns"][0]
        assert turn["status"] == "ok" and turn["clip_id"]

        audio_turn = client.post(
            f"/api/sessions/{session_id}/turns",
            files={"audio": ("q.wav", io.BytesIO(sine_wave(300).data), "audio/wav")},
        )
        SCANNED_OUTPUT.append(audio_turn.text)
        assert audio_turn.status_code == 503
        assert audio_turn.json()["code"] == "provider_disabled"
    record_criterion(
        "criterion-4 text-only fallback",
        "text turn ok end-to-end; audio turn 503 provider_disabled",
    )


def test_criterion_5_session_safety(tmp_path):
    # part A: exactly one of two concurrent submissions wins
    config = materialize_fixtures(tmp_path / "stress")
    platform = build_platform(config)
    platform.providers.lipsync = SimulatedLipsync((300, 300))
    platform.sessions.pipeline.providers = platform.providers
    with TestClient(create_app(platform)) as client:
        session_id = client.post(
            "/api/sessions", json={"persona_id": "maria-gonzalez"}
        ).json()["session_id"]
        barrier = threading.Barrier(2)

        def submit(i):
            barrier.wait()
            response = client.post(
                f"/api/sessions/{session_id}/turns", json={"text": f"racing turn {i}"}
            )
            SCANNED_OUTPUT.append(response.text)
            return response

        with ThreadPoolExecutor(max_workers=2) as pool:
            responses = list(pool.map(submit, range(2)))
        statuses = sorted(r.status_code for r in responses)
        assert statuses == [202, 409], statuses
        accepted = next(r for r in responses if r.status_code == 202)
        platform.sessions.wait_for_turn(session_id, accepted.json()["job_id"], timeout_s=10)

    # part B: 100 sequential offline turns, then a durability round-trip
    config_b = materialize_fixtures(tmp_path / "seq")
    manager = build_platform(config_b).sessions
    session = manager.create_session("maria-gonzalez")
    for i in range(100):
        job_id = manager.submit_turn(session.session_id, text=f"question {i}")
        manager.wait_for_turn(session.session_id, job_id)
    transcript = manager.get_transcript(session.session_id)
    assert [t.index for t in transcript] == list(range(100))
    assert all(t.status == "ok" for t in transcript)

    reloaded = manager.session_store.load(session.session_id)
    live = manager.get_session(session.session_id)
    assert reloaded == live  # field-for-field dataclass equality
    assert reloaded.turns == live.turns
    record_criterion(
        "criterion-5 session safety",
        "race gave one 202 + one 409; 100 turns contiguous; persistence round-trip equal",
    )


def test_criterion_6_cache(tmp_path):
    config = materialize_fixtures(tmp_path / "cache")
    manager = build_platform(config).sessions
    session = manager.create_session("maria-gonzalez")

    job1 = manager.submit_turn(session.session_id, text="Do you understand the plan?")
    first = manager.wait_for_turn(session.session_id, job1)
    assert first.cache_hit is False

    job2 = manager.submit_turn(session.session_id, text="Do you understand the plan?")
    second = manager.wait_for_turn(session.session_id, job2)
    assert second.cache_hit is True
    assert second.timings.render_ms == 0.0
    assert second.timings.render_skipped is True
    assert second.clip_id == first.clip_id

    # changing any single voice-parameter component forces a miss
    voice = manager.store.get_voice("maria-voice-01")
    base = voice.defaults
    variations = {
        "stability": VoiceParams(_bump(base.stability), base.similarity, base.style),
        "similarity": VoiceParams(base.stability, _bump(base.similarity), base.style),
        "style": VoiceParams(base.stability, base.similarity, _bump(base.style)),
    }
    for component, params in variations.items():
        job = manager.submit_turn(
            session.session_id, text="Do you understand the plan?", voice_params=params
        )
        result = manager.wait_for_turn(session.session_id, job)
        assert result.cache_hit is False, f"changing {component} must miss the cache"
    record_criterion(
        "criterion-6 cache",
        "repeat turn hit with zero skipped render and same clip id; any voice-param change misses",
    )


def _bump(value: float) -> float:
    return value - 0.1 if value >= 0.5 else value + 0.1


def test_criterion_7_store_integrity(tmp_path):
    runner = CliRunner()
    config = materialize_fixtures(tmp_path / "fsck")
    store_dir = str(config.store_root)

    clean = runner.invoke(main, ["assets", "fsck", "--store", store_dir])
    SCANNED_OUTPUT.append(clean.output)
    assert clean.exit_code == 0

    store = AssetStore(config.store_root)
    _, path = store.get_base_video("maria-base-01")
    raw = bytearray(path.read_bytes())
    raw[7] ^= 0x20  # single-byte corruption
    path.write_bytes(bytes(raw))

    broken = runner.invoke(main, ["assets", "fsck", "--store", store_dir])
    SCANNED_OUTPUT.append(broken.output)
    assert broken.exit_code != 0
    assert "maria-base-01" in broken.output

    # overhead bound over the criterion-1 turns
    payload = run_demo_five_lines()
    overheads = [t["timings"]["overhead_ms"] for t in payload["turns"]]
    assert all(0 <= o <= 50 for o in overheads), overheads
    record_criterion(
        "criterion-7 store integrity",
        f"fsck clean then names corrupted asset; overhead max "
        f"{max(overheads):.1f} ms <= 50 ms",
    )


def test_criterion_8_validation_and_secret_hygiene(tmp_path):
    runner = CliRunner()
    config = materialize_fixtures(tmp_path / "validation")

    # persona missing belief_system: rejected at the CLI with the field path...
    doc = json.loads((config.personas_dir / "maria-gonzalez.json").read_text())
    doc["id"] = "no-belief"
    doc["belief_system"] = ""
    bad_file = config.personas_dir / "no-belief.json"
    bad_file.write_text(json.dumps(doc))
    cli_result = runner.invoke(main, ["persona", "validate", str(bad_file)])
    SCANNED_OUTPUT.append(cli_result.output)
    assert cli_result.exit_code == 1
    assert "belief_system" in cli_result.output

    # ...and at the gateway with a 422 naming the same path
    platform = build_platform(config)
    with TestClient(create_app(platform)) as client:
        response = client.post("/api/sessions", json={"persona_id": "no-belief"})
        SCANNED_OUTPUT.append(response.text)
        assert response.status_code == 422
        assert response.json()["code"] == "invalid_persona"
        assert "belief_system" in response.json()["message"]

    # exercise a credentialed remote call so the secret is actually in play,
    # then scan everything criteria 1-8 emitted
    def handler(request):
        assert request.headers["Authorization"] == f"Bearer {FAKE_SECRET}"
        return httpx.Response(401)

    remote = RemoteDialogue(
        ProviderConfig(
            kind="dialogue", mode="remote",
            endpoint="https://provider.test/v1", credential_env=FAKE_SECRET_ENV,
        ),
        transport=httpx.MockTransport(handler),
    )
    bundle = assemble_prompt(make_profile(), SIMPLE_INSTRUCTIONS)
    from telesim.errors import ProviderAuth
    from telesim.providers.base import DialogueParams

    with pytest.raises(ProviderAuth) as err:
        remote.generate_reply(bundle, [], "hello", DialogueParams())
    SCANNED_OUTPUT.append(str(err.value))
    SCANNED_OUTPUT.append(json.dumps(remote.config.to_public_dict()))

    blob = "\n".join(SCANNED_OUTPUT)
    assert FAKE_SECRET not in blob
    record_criterion(
        "criterion-8 validation + secret hygiene",
        "belief_system named at CLI (exit 1) and gateway (422); "
        f"secret absent from {len(SCANNED_OUTPUT)} captured outputs",
    )
