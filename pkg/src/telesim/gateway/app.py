"""Gateway endpoints the console (and any client) uses to run an encounter.

Wire protocol: JSON request/response bodies, multipart uploads with a
single ``audio`` field (canonical WAV only), and JSON event frames over
WebSocket. Every error body carries a stable ``code`` from ERROR_STATUS;
clip URLs are scoped by the session token that produced them.
"""

from __future__ import annotations

import json
import logging
import queue
from pathlib import Path

import anyio
from fastapi import FastAPI, Request, WebSocket, WebSocketDisconnect
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response
from starlette.websockets import WebSocketState

from ..audio import AudioBlob
from ..errors import (
    AudioFormatError,
    EmptyInput,
    ProviderDisabled,
    TelesimError,
    UnknownAsset,
    UnknownSession,
)
from ..persona import PatientProfile
from ..runtime import Platform
from ..session import Session, SessionEvent, Turn

logger = logging.getLogger(__name__)

SCENARIO_TEASER_CHARS = 160
MAX_AUDIO_BYTES = 2 * 1024 * 1024
MAX_AUDIO_MS = 60_000

WS_CLOSE_UNKNOWN_SESSION = 4404
WS_POLL_SECONDS = 0.5

# The documented closed set of error codes and their HTTP statuses.
ERROR_STATUS = {
    "parse_error": 400,
    "forbidden": 403,
    "unknown_persona": 404,
    "unknown_session": 404,
    "unknown_asset": 404,
    "unknown_job": 404,
    "session_busy": 409,
    "session_closed": 410,
    "audio_too_large": 413,
    "unsupported_media": 415,
    "bad_range": 416,
    "empty_input": 422,
    "invalid_profile": 422,
    "invalid_persona": 422,
    "checksum_mismatch": 500,
    "config_error": 500,
    "internal": 500,
    "provider_disabled": 503,
}

CONTAINER_CONTENT_TYPES = {
    "wav": "audio/wav",
    "mp4": "video/mp4",
    "webm": "video/webm",
}


class GatewayError(TelesimError):
    """Endpoint-level error with an explicit code."""

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


def error_body(code: str, message: str) -> dict:
    return {"code": code, "message": message}


def persona_summary(profile: PatientProfile) -> dict:
    """Learner-facing projection: never exposes the hidden persona attributes."""
    teaser = profile.scenario.strip().replace("\n", " ")
    if len(teaser) > SCENARIO_TEASER_CHARS:
        teaser = teaser[: SCENARIO_TEASER_CHARS - 3] + "..."
    return {
        "id": profile.id,
        "display_name": profile.display_name,
        "scenario_teaser": teaser,
    }


def turn_payload(turn: Turn, session_id: str) -> dict:
    payload = turn.to_dict()
    if turn.clip_id:
        payload["clip_url"] = f"/media/clips/{turn.clip_id}?session={session_id}"
    return payload


def frame_payload(frame: SessionEvent) -> dict:
    payload = frame.to_dict()
    if frame.stage == "ready" and frame.detail:
        payload["clip_url"] = f"/media/clips/{frame.detail}?session={frame.session_id}"
    return payload


def session_descriptor(platform: Platform, session: Session) -> dict:
    profile, _ = platform.registry.get(session.persona_id)
    descriptor = {
        "session_id": session.session_id,
        "persona": persona_summary(profile) if profile else {"id": session.persona_id},
        "state": session.state,
        "created_at": session.created_at,
        "turn_count": len(session.turns),
        "text_only": platform.providers.transcriber is None,
    }
    if profile:
        descriptor["idle_video_url"] = f"/media/base/{profile.base_video_id}"
    return descriptor


def create_app(platform: Platform) -> FastAPI:
    app = FastAPI(title="telesim gateway", version="0.1.0", docs_url=None, redoc_url=None)
    app.state.platform = platform
    manager = platform.sessions

    if platform.config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=platform.config.cors_origins,
            allow_methods=["*"],
            allow_headers=["*"],
        )

    @app.exception_handler(TelesimError)
    async def telesim_error_handler(request: Request, exc: TelesimError):
        status = ERROR_STATUS.get(exc.code, 500)
        return JSONResponse(status_code=status, content=error_body(exc.code, str(exc)))

    # -- personas -------------------------------------------------------------

    @app.get("/api/personas")
    async def list_personas():
        return [persona_summary(p) for p in platform.registry.list_valid()]

    # -- sessions -------------------------------------------------------------

    @app.post("/api/sessions", status_code=201)
    async def create_session(request: Request):
        body = await _json_body(request)
        persona_id = body.get("persona_id", "")
        if not isinstance(persona_id, str) or not persona_id:
            raise EmptyInput("persona_id is required")
        session = await anyio.to_thread.run_sync(manager.create_session, persona_id)
        return session_descriptor(platform, session)

    @app.get("/api/sessions/{session_id}")
    async def get_session(session_id: str):
        return session_descriptor(platform, manager.get_session(session_id))

    @app.delete("/api/sessions/{session_id}")
    async def close_session(session_id: str):
        session = await anyio.to_thread.run_sync(manager.close_session, session_id)
        return session_descriptor(platform, session)

    @app.get("/api/sessions/{session_id}/transcript")
    async def get_transcript(session_id: str):
        turns = manager.get_transcript(session_id)
        return {
            "session_id": session_id,
            "turns": [turn_payload(t, session_id) for t in turns],
        }

    @app.post("/api/sessions/{session_id}/turns", status_code=202)
    async def submit_turn(session_id: str, request: Request):
        manager.get_session(session_id)  # 404 before payload inspection
        content_type = request.headers.get("content-type", "")
        if content_type.startswith("multipart/form-data"):
            if platform.providers.transcriber is None:
                raise ProviderDisabled(
                    "this deployment is text-only; send JSON {\"text\": ...} instead"
                )
            audio = await _read_audio_upload(request)
            job_id = await anyio.to_thread.run_sync(
                lambda: manager.submit_turn(session_id, audio=audio)
            )
        elif content_type.startswith("application/json"):
            body = await _json_body(request)
            text = body.get("text", "")
            if not isinstance(text, str) or not text.strip():
                raise EmptyInput("text must be a nonempty string")
            job_id = await anyio.to_thread.run_sync(
                lambda: manager.submit_turn(session_id, text=text)
            )
        else:
            raise GatewayError(
                "unsupported_media",
                "send JSON {\"text\": ...} or multipart form data with an `audio` WAV field",
            )
        return {"job_id": job_id}

    # -- events ------------------------------------------------------------------

    @app.websocket("/api/sessions/{session_id}/events")
    async def session_events(websocket: WebSocket, session_id: str):
        await websocket.accept()
        try:
            manager.get_session(session_id)
        except UnknownSession:
            await websocket.close(code=WS_CLOSE_UNKNOWN_SESSION, reason="unknown_session")
            return
        try:
            after = int(websocket.query_params.get("after", "0"))
        except ValueError:
            after = 0
        sub = manager.hub.subscribe(session_id, after_seq=after)
        try:
            async with anyio.create_task_group() as tg:
                # consume the socket so client disconnects are seen promptly;
                # without this, shutdown would wait on the send loop forever
                async def watch_disconnect():
                    while True:
                        message = await websocket.receive()
                        if message["type"] == "websocket.disconnect":
                            tg.cancel_scope.cancel()
                            return

                tg.start_soon(watch_disconnect)
                for frame in sub.history:
                    await websocket.send_json(frame_payload(frame))
                while websocket.client_state == WebSocketState.CONNECTED:
                    try:
                        frame = await anyio.to_thread.run_sync(
                            lambda: sub.queue.get(timeout=WS_POLL_SECONDS)
                        )
                    except queue.Empty:
                        continue
                    await websocket.send_json(frame_payload(frame))
                tg.cancel_scope.cancel()
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            manager.hub.unsubscribe(session_id, sub)

    # -- media ----------------------------------------------------------------------

    @app.get("/media/clips/{clip_id}")
    async def get_clip(clip_id: str, request: Request):
        token = request.query_params.get("session", "")
        try:
            record, path = platform.store.get_clip(clip_id)
        except UnknownAsset:
            raise GatewayError("unknown_asset", f"no clip {clip_id!r}")
        if not token or not manager.session_references_clip(token, clip_id):
            raise GatewayError("forbidden", "clip access requires the owning session token")
        content_type = CONTAINER_CONTENT_TYPES.get(
            record.container, "application/octet-stream"
        )
        return _file_response(path, content_type, request)

    @app.get("/media/base/{base_video_id}")
    async def get_base_video(base_video_id: str, request: Request):
        record, path = platform.store.get_base_video(base_video_id)
        return _file_response(path, record.content_type, request)

    # -- console static files ----------------------------------------------------------

    dist = platform.config.console_dist
    if dist is not None and Path(dist).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(dist), html=True), name="console")

    return app


async def _json_body(request: Request) -> dict:
    try:
        body = json.loads(await request.body() or b"{}")
    except json.JSONDecodeError:
        raise GatewayError("parse_error", "request body is not valid JSON")
    if not isinstance(body, dict):
        raise GatewayError("parse_error", "request body must be a JSON object")
    return body


async def _read_audio_upload(request: Request) -> AudioBlob:
    form = await request.form()
    upload = form.get("audio")
    if upload is None or isinstance(upload, str):
        raise GatewayError("unsupported_media", "multipart field `audio` (WAV file) required")
    data = await upload.read()
    if len(data) > MAX_AUDIO_BYTES:
        raise GatewayError("audio_too_large", f"audio uploads are capped at {MAX_AUDIO_BYTES} bytes")
    if not data:
        raise EmptyInput("audio upload is empty")
    try:
        blob = AudioBlob(data=data)
    except AudioFormatError as exc:
        raise GatewayError("unsupported_media", str(exc))
    if blob.is_empty():
        raise EmptyInput("audio contains no samples")
    if blob.duration_ms > MAX_AUDIO_MS:
        raise GatewayError("audio_too_large", "audio uploads are capped at 60 seconds")
    return blob


def _file_response(path: Path, content_type: str, request: Request) -> Response:
    data = path.read_bytes()
    total = len(data)
    range_header = request.headers.get("range")
    common = {"Accept-Ranges": "bytes"}
    if not range_header:
        return Response(content=data, media_type=content_type, headers=common)
    start, end = _parse_range(range_header, total)
    body = data[start : end + 1]
    headers = {
        **common,
        "Content-Range": f"bytes {start}-{end}/{total}",
    }
    return Response(content=body, status_code=206, media_type=content_type, headers=headers)


def _parse_range(header: str, total: int) -> tuple[int, int]:
    """Single-range `bytes=` parser; raises a 416-coded error when unsatisfiable."""
    try:
        unit, _, spec = header.partition("=")
        if unit.strip() != "bytes" or "," in spec:
            raise ValueError
        start_s, _, end_s = spec.strip().partition("-")
        if start_s == "":
            # suffix form: last N bytes
            length = int(end_s)
            if length <= 0:
                raise ValueError
            start = max(0, total - length)
            end = total - 1
        else:
            start = int(start_s)
            end = int(end_s) if end_s else total - 1
        if start > end or start >= total:
            raise ValueError
        end = min(end, total - 1)
        return start, end
    except ValueError:
        raise GatewayError("bad_range", f"unsatisfiable range {header!r} for {total} bytes")
