import io
import json
import wave

import pytest
from starlette.testclient import TestClient
from starlette.websockets import WebSocketDisconnect

from telesim.audio import sine_wave
from telesim.gateway import create_app
from telesim.pipeline import CANONICAL_ORDER_TEXT
from telesim.runtime import build_platform, materialize_fixtures


@pytest.fixture
def client(platform):
    with TestClient(create_app(platform)) as c:
        c.platform = platform
        yield c


@pytest.fixture
def text_only_client(tmp_path):
    config = materialize_fixtures(tmp_path / "text-only")
    platform = build_platform(config)
    platform.providers.transcriber = None
    platform.sessions.pipeline.providers = platform.providers
    with TestClient(create_app(platform)) as c:
        c.platform = platform
        yield c


def create_session(client, persona="maria-gonzalez"):
    response = client.post("/api/sessions", json={"persona_id": persona})
    assert response.status_code == 201, response.text
    return response.json()


def run_text_turn(client, session_id, text):
    response = client.post(f"/api/sessions/{session_id}/turns", json={"text": text})
    assert response.status_code == 202, response.text
    job_id = response.json()["job_id"]
    client.platform.sessions.wait_for_turn(session_id, job_id)
    return job_id


def wav_upload(duration_ms=400):
    return ("question.wav", io.BytesIO(sine_wave(duration_ms).data), "audio/wav")


class TestPersonas:
    def test_lists_valid_personas_with_projection_only(self, client):
        personas = client.get("/api/personas").json()
        ids = {p["id"] for p in personas}
        assert {"maria-gonzalez", "david-okafor"} <= ids
        for p in personas:
            assert set(p) == {"id", "display_name", "scenario_teaser"}
            # hidden attributes never leak to learners
            assert "belief" not in json.dumps(p).lower()

    def test_invalid_persona_excluded(self, tmp_path, caplog):
        config = materialize_fixtures(tmp_path / "ws")
        broken = config.personas_dir / "broken.json"
        doc = json.loads((config.personas_dir / "maria-gonzalez.json").read_text())
        doc["id"] = "broken-persona"
        doc["belief_system"] = ""
        broken.write_text(json.dumps(doc))
        platform = build_platform(config)
        with TestClient(create_app(platform)) as client:
            ids = {p["id"] for p in client.get("/api/personas").json()}
        assert "broken-persona" not in ids
        assert any("broken-persona" in r.message for r in caplog.records)

    def test_empty_registry(self, tmp_path):
        config = materialize_fixtures(tmp_path / "ws")
        for f in config.personas_dir.glob("*.json"):
            f.unlink()
        platform = build_platform(config)
        with TestClient(create_app(platform)) as client:
            assert client.get("/api/personas").json() == []


class TestSessions:
    def test_create_returns_descriptor(self, client):
        descriptor = create_session(client)
        assert descriptor["state"] == "idle"
        assert descriptor["turn_count"] == 0
        assert descriptor["idle_video_url"] == "/media/base/maria-base-01"
        assert descriptor["text_only"] is False
        assert descriptor["persona"]["display_name"] == "Maria Gonzalez"

    def test_unknown_persona_404(self, client):
        response = client.post("/api/sessions", json={"persona_id": "ghost"})
        assert response.status_code == 404
        assert response.json()["code"] == "unknown_persona"

    def test_invalid_persona_422(self, tmp_path):
        config = materialize_fixtures(tmp_path / "ws")
        doc = json.loads((config.personas_dir / "maria-gonzalez.json").read_text())
        doc["id"] = "no-belief"
        doc["belief_system"] = ""
        (config.personas_dir / "no-belief.json").write_text(json.dumps(doc))
        platform = build_platform(config)
        with TestClient(create_app(platform)) as client:
            response = client.post("/api/sessions", json={"persona_id": "no-belief"})
        assert response.status_code == 422
        assert response.json()["code"] == "invalid_persona"
        assert "belief_system" in response.json()["message"]

    def test_missing_persona_id_422(self, client):
        response = client.post("/api/sessions", json={})
        assert response.status_code == 422
        assert response.json()["code"] == "empty_input"

    def test_close_session(self, client):
        session_id = create_session(client)["session_id"]
        response = client.delete(f"/api/sessions/{session_id}")
        assert response.json()["state"] == "closed"
        again = client.delete(f"/api/sessions/{session_id}")
        assert again.json()["state"] == "closed"


class TestTurns:
    def test_json_text_turn_happy_path(self, client):
        session_id = create_session(client)["session_id"]
        run_text_turn(client, session_id, "How are you sleeping?")
        transcript = client.get(f"/api/sessions/{session_id}/transcript").json()
        assert len(transcript["turns"]) == 1
        turn = transcript["turns"][0]
        assert turn["status"] == "ok"
        assert turn["clip_url"].startswith("/media/clips/")

    def test_busy_409(self, tmp_path):
        from telesim.providers.simulated import SimulatedLipsync

        config = materialize_fixtures(tmp_path / "ws")
        platform = build_platform(config)
        platform.providers.lipsync = SimulatedLipsync((400, 400))
        platform.sessions.pipeline.providers = platform.providers
        with TestClient(create_app(platform)) as client:
            session_id = client.post(
                "/api/sessions", json={"persona_id": "maria-gonzalez"}
            ).json()["session_id"]
            first = client.post(f"/api/sessions/{session_id}/turns", json={"text": "one"})
            assert first.status_code == 202
            second = client.post(f"/api/sessions/{session_id}/turns", json={"text": "two"})
            assert second.status_code == 409
            assert second.json()["code"] == "session_busy"

    def test_unknown_session_404(self, client):
        response = client.post("/api/sessions/nope/turns", json={"text": "hi"})
        assert response.status_code == 404
        assert response.json()["code"] == "unknown_session"

    def test_empty_text_422(self, client):
        session_id = create_session(client)["session_id"]
        response = client.post(f"/api/sessions/{session_id}/turns", json={"text": "  "})
        assert response.status_code == 422
        assert response.json()["code"] == "empty_input"

    def test_closed_session_410(self, client):
        session_id = create_session(client)["session_id"]
        client.delete(f"/api/sessions/{session_id}")
        response = client.post(f"/api/sessions/{session_id}/turns", json={"text": "hi"})
        assert response.status_code == 410
        assert response.json()["code"] == "session_closed"

    def test_multipart_audio_turn(self, client):
        session_id = create_session(client)["session_id"]
        response = client.post(
            f"/api/sessions/{session_id}/turns", files={"audio": wav_upload()}
        )
        assert response.status_code == 202
        client.platform.sessions.wait_for_turn(session_id, response.json()["job_id"])
        transcript = client.get(f"/api/sessions/{session_id}/transcript").json()
        assert transcript["turns"][0]["status"] == "ok"

    def test_audio_to_text_only_deployment_503(self, text_only_client):
        session = create_session(text_only_client)
        assert session["text_only"] is True
        response = text_only_client.post(
            f"/api/sessions/{session['session_id']}/turns", files={"audio": wav_upload()}
        )
        assert response.status_code == 503
        assert response.json()["code"] == "provider_disabled"

    def test_text_works_on_text_only_deployment(self, text_only_client):
        session_id = create_session(text_only_client)["session_id"]
        run_text_turn(text_only_client, session_id, "typed question")
        transcript = text_only_client.get(f"/api/sessions/{session_id}/transcript").json()
        assert transcript["turns"][0]["status"] == "ok"

    def test_non_wav_audio_415(self, client):
        session_id = create_session(client)["session_id"]
        response = client.post(
            f"/api/sessions/{session_id}/turns",
            files={"audio": ("x.mp3", io.BytesIO(b"ID3 not a wav"), "audio/mpeg")},
        )
        assert response.status_code == 415
        assert response.json()["code"] == "unsupported_media"

    def test_wrong_sample_rate_415(self, client):
        buf = io.BytesIO()
        with wave.open(buf, "wb") as w:
            w.setnchannels(1)
            w.setsampwidth(2)
            w.setframerate(44_100)
            w.writeframes(b"\x00\x00" * 100)
        session_id = create_session(client)["session_id"]
        response = client.post(
            f"/api/sessions/{session_id}/turns",
            files={"audio": ("x.wav", io.BytesIO(buf.getvalue()), "audio/wav")},
        )
        assert response.status_code == 415

    def test_oversized_audio_413(self, client):
        session_id = create_session(client)["session_id"]
        big = b"RIFF" + b"\x00" * (2 * 1024 * 1024 + 10)
        response = client.post(
            f"/api/sessions/{session_id}/turns",
            files={"audio": ("x.wav", io.BytesIO(big), "audio/wav")},
        )
        assert response.status_code == 413
        assert response.json()["code"] == "audio_too_large"

    def test_unsupported_content_type_415(self, client):
        session_id = create_session(client)["session_id"]
        response = client.post(
            f"/api/sessions/{session_id}/turns",
            content=b"plain words",
            headers={"content-type": "text/plain"},
        )
        assert response.status_code == 415


class TestEventStream:
    def test_canonical_order_with_increasing_seq(self, client):
        session_id = create_session(client)["session_id"]
        with client.websocket_connect(f"/api/sessions/{session_id}/events") as ws:
            response = client.post(
                f"/api/sessions/{session_id}/turns", json={"text": "tell me"}
            )
            assert response.status_code == 202
            frames = [ws.receive_json() for _ in range(5)]
        assert [f["stage"] for f in frames] == list(CANONICAL_ORDER_TEXT)
        seqs = [f["seq"] for f in frames]
        assert seqs == sorted(seqs) and len(set(seqs)) == len(seqs)
        ready = frames[-1]
        assert ready["clip_url"].startswith("/media/clips/")
        assert f"session={session_id}" in ready["clip_url"]

    def test_resume_from_cursor_replays_rest(self, client):
        session_id = create_session(client)["session_id"]
        run_text_turn(client, session_id, "first question")
        frames = client.platform.sessions.hub.events(session_id)
        thinking_seq = next(f.seq for f in frames if f.stage == "thinking")
        with client.websocket_connect(
            f"/api/sessions/{session_id}/events?after={thinking_seq}"
        ) as ws:
            replayed = [ws.receive_json() for _ in range(3)]
        assert [f["stage"] for f in replayed] == ["synthesizing", "rendering", "ready"]

    def test_unknown_session_close_code(self, client):
        with pytest.raises(WebSocketDisconnect) as err:
            with client.websocket_connect("/api/sessions/ghost/events") as ws:
                ws.receive_json()
        assert err.value.code == 4404

    def test_multiple_observers_get_same_frames(self, client):
        session_id = create_session(client)["session_id"]
        with client.websocket_connect(f"/api/sessions/{session_id}/events") as a:
            with client.websocket_connect(f"/api/sessions/{session_id}/events") as b:
                client.post(f"/api/sessions/{session_id}/turns", json={"text": "hi"})
                frames_a = [a.receive_json()["stage"] for _ in range(5)]
                frames_b = [b.receive_json()["stage"] for _ in range(5)]
        assert frames_a == frames_b == list(CANONICAL_ORDER_TEXT)


class TestMedia:
    def test_clip_requires_owning_session_token(self, client):
        session_id = create_session(client)["session_id"]
        run_text_turn(client, session_id, "say something")
        clip_url = client.get(f"/api/sessions/{session_id}/transcript").json()["turns"][0][
            "clip_url"
        ]
        ok = client.get(clip_url)
        assert ok.status_code == 200
        assert ok.headers["content-type"] == "audio/wav"
        assert len(ok.content) > 44

        other = create_session(client, persona="david-okafor")["session_id"]
        clip_id = clip_url.split("/")[-1].split("?")[0]
        foreign = client.get(f"/media/clips/{clip_id}?session={other}")
        assert foreign.status_code == 403
        assert foreign.json()["code"] == "forbidden"

        missing_token = client.get(f"/media/clips/{clip_id}")
        assert missing_token.status_code == 403

    def test_unknown_clip_404(self, client):
        response = client.get("/media/clips/deadbeef?session=x")
        assert response.status_code == 404

    def test_range_request_exact_bytes(self, client):
        session_id = create_session(client)["session_id"]
        run_text_turn(client, session_id, "range test")
        clip_url = client.get(f"/api/sessions/{session_id}/transcript").json()["turns"][0][
            "clip_url"
        ]
        response = client.get(clip_url, headers={"Range": "bytes=0-1023"})
        assert response.status_code == 206
        assert len(response.content) == 1024
        total = int(response.headers["content-range"].split("/")[1])
        assert response.headers["content-range"] == f"bytes 0-1023/{total}"

    def test_suffix_and_open_ranges(self, client):
        response = client.get("/media/base/maria-base-01", headers={"Range": "bytes=-100"})
        assert response.status_code == 206
        assert len(response.content) == 100
        response = client.get("/media/base/maria-base-01", headers={"Range": "bytes=10-"})
        assert response.status_code == 206

    def test_bad_range_416(self, client):
        response = client.get(
            "/media/base/maria-base-01", headers={"Range": "bytes=999999999-"}
        )
        assert response.status_code == 416
        assert response.json()["code"] == "bad_range"

    def test_base_video_served_with_content_type(self, client):
        response = client.get("/media/base/maria-base-01")
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("application/octet-stream")
        assert response.headers["accept-ranges"] == "bytes"


class TestConsoleMount:
    def test_static_console_served_when_configured(self, tmp_path):
        dist = tmp_path / "dist"
        dist.mkdir()
        (dist / "index.html").write_text("<html><body>console shell</body></html>")
        config = materialize_fixtures(tmp_path / "ws")
        config.console_dist = dist
        platform = build_platform(config)
        with TestClient(create_app(platform)) as client:
            page = client.get("/")
            assert page.status_code == 200
            assert "console shell" in page.text
            # API routes still take precedence over the static mount
            assert client.get("/api/personas").status_code == 200


class TestCors:
    def test_configured_origin_allowed(self, client):
        response = client.get(
            "/api/personas", headers={"Origin": "http://localhost:5173"}
        )
        assert response.headers.get("access-control-allow-origin") == "http://localhost:5173"

    def test_foreign_origin_not_acknowledged(self, client):
        response = client.get("/api/personas", headers={"Origin": "https://evil.example"})
        assert "access-control-allow-origin" not in response.headers


class TestErrorHygiene:
    def test_error_bodies_carry_stable_codes_and_no_tracebacks(self, client):
        responses = [
            client.post("/api/sessions", json={"persona_id": "ghost"}),
            client.post("/api/sessions/none/turns", json={"text": "x"}),
            client.get("/media/clips/none?session=x"),
            client.post("/api/sessions", content=b"{broken", headers={"content-type": "application/json"}),
        ]
        from telesim.gateway import ERROR_STATUS

        for response in responses:
            body = response.json()
            assert body["code"] in ERROR_STATUS
            assert "Traceback" not in response.text
            assert ERROR_STATUS[body["code"]] == response.status_code
