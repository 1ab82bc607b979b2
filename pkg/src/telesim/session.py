"""Conversation lifecycle and the authoritative transcript.

A session is a small state machine (idle → processing → idle, any state →
closed) owning an append-only list of turns. Every stage event a session's
jobs emit is sequence-stamped here, so any number of observers can follow
or resume an encounter in order. Sessions persist as one JSON-lines event
log each plus a snapshot index, and reload field-for-field equal.
"""

from __future__ import annotations

import json
import logging
import queue
import secrets
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .assets import AssetStore
from .audio import AudioBlob
from .errors import (
    EmptyInput,
    InvalidPersona,
    SessionBusy,
    SessionClosed,
    TelesimError,
    UnknownPersona,
    UnknownSession,
)
from .persona import PatientProfile, PromptBundle, RolePlayInstructions, assemble_prompt
from .pipeline import (
    PipelineJob,
    StageEvent,
    StageTimings,
    TurnContext,
    TurnPipeline,
    new_job_id,
)
from .providers import ProviderSet
from .providers.base import BaseVideoHandle, DialogueParams, VoiceParams

logger = logging.getLogger(__name__)

LOG_VERSION = 1

SPEAKER_LEARNER = "learner"
SPEAKER_PATIENT = "patient"


def new_session_id() -> str:
    """Random 128-bit token; doubles as the unguessable access token."""
    return secrets.token_hex(16)


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass(frozen=True)
class Turn:
    index: int
    status: str  # "ok" | "failed"
    user_text: str
    patient_text: str | None = None
    clip_id: str | None = None
    timings: StageTimings | None = None
    cause: str | None = None

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "status": self.status,
            "user_text": self.user_text,
            "patient_text": self.patient_text,
            "clip_id": self.clip_id,
            "timings": self.timings.to_dict() if self.timings else None,
            "cause": self.cause,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "Turn":
        timings = raw.get("timings")
        return cls(
            index=raw["index"],
            status=raw["status"],
            user_text=raw["user_text"],
            patient_text=raw.get("patient_text"),
            clip_id=raw.get("clip_id"),
            timings=StageTimings.from_dict(timings) if timings else None,
            cause=raw.get("cause"),
        )


@dataclass
class Session:
    session_id: str
    persona_id: str
    state: str  # "idle" | "processing" | "closed"
    created_at: str
    prompt_hash: str
    turns: list[Turn] = field(default_factory=list)
    # runtime-only; excluded from equality so persisted sessions round-trip
    bundle: PromptBundle | None = field(default=None, compare=False, repr=False)
    profile: PatientProfile | None = field(default=None, compare=False, repr=False)
    current_job_id: str | None = field(default=None, compare=False)
    closing: bool = field(default=False, compare=False)


@dataclass(frozen=True)
class SessionEvent:
    """A stage event stamped with its per-session sequence number."""

    session_id: str
    seq: int
    job_id: str
    turn_index: int
    stage: str
    at_monotonic: float
    at_wall: str
    detail: str | None = None

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "seq": self.seq,
            "job_id": self.job_id,
            "turn_index": self.turn_index,
            "stage": self.stage,
            "at_monotonic": self.at_monotonic,
            "at_wall": self.at_wall,
            "detail": self.detail,
        }


class Subscription:
    def __init__(self, history: list[SessionEvent]):
        self.history = history
        self.queue: "queue.Queue[SessionEvent]" = queue.Queue()


class EventHub:
    """Per-session ordered event history with live fan-out to subscribers."""

    def __init__(self):
        self._lock = threading.Lock()
        self._history: dict[str, list[SessionEvent]] = {}
        self._subscribers: dict[str, list[Subscription]] = {}

    def publish(self, session_id: str, job_id: str, turn_index: int,
                event: StageEvent) -> SessionEvent:
        with self._lock:
            history = self._history.setdefault(session_id, [])
            frame = SessionEvent(
                session_id=session_id,
                seq=len(history) + 1,
                job_id=job_id,
                turn_index=turn_index,
                stage=event.stage,
                at_monotonic=event.at,
                at_wall=_now_iso(),
                detail=event.detail,
            )
            history.append(frame)
            subscribers = list(self._subscribers.get(session_id, ()))
        for sub in subscribers:
            sub.queue.put(frame)
        return frame

    def subscribe(self, session_id: str, after_seq: int = 0) -> Subscription:
        """Register a live subscriber; frames with seq > after_seq that
        already happened are replayed via ``history``."""
        with self._lock:
            history = [f for f in self._history.get(session_id, ()) if f.seq > after_seq]
            sub = Subscription(history)
            self._subscribers.setdefault(session_id, []).append(sub)
        return sub

    def unsubscribe(self, session_id: str, sub: Subscription):
        with self._lock:
            subs = self._subscribers.get(session_id)
            if subs and sub in subs:
                subs.remove(sub)

    def events(self, session_id: str) -> list[SessionEvent]:
        with self._lock:
            return list(self._history.get(session_id, ()))


class SessionStore:
    """Append-only JSONL event log per session plus a snapshot index."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _log_path(self, session_id: str) -> Path:
        return self.root / f"{session_id}.jsonl"

    def _append(self, session_id: str, record: dict):
        record = {"v": LOG_VERSION, **record}
        line = json.dumps(record, sort_keys=True, separators=(",", ":")) + "\n"
        with self._lock:
            with open(self._log_path(session_id), "a", encoding="utf-8") as f:
                f.write(line)

    def record_created(self, session: Session):
        self._append(session.session_id, {
            "type": "created",
            "session_id": session.session_id,
            "persona_id": session.persona_id,
            "prompt_hash": session.prompt_hash,
            "created_at": session.created_at,
        })
        self._update_index(session)

    def record_turn(self, session: Session, turn: Turn):
        self._append(session.session_id, {"type": "turn", "turn": turn.to_dict()})
        self._update_index(session)

    def record_closed(self, session: Session):
        self._append(session.session_id, {"type": "closed", "at": _now_iso()})
        self._update_index(session)

    def _update_index(self, session: Session):
        index_path = self.root / "index.json"
        with self._lock:
            if index_path.exists():
                index = json.loads(index_path.read_text(encoding="utf-8"))
            else:
                index = {"version": LOG_VERSION, "sessions": {}}
            index["sessions"][session.session_id] = {
                "persona_id": session.persona_id,
                "state": "closed" if session.state == "closed" else "idle",
                "turn_count": len(session.turns),
                "created_at": session.created_at,
            }
            tmp = index_path.with_suffix(".json.tmp")
            tmp.write_text(json.dumps(index, indent=2, sort_keys=True), encoding="utf-8")
            tmp.replace(index_path)

    def load(self, session_id: str) -> Session:
        path = self._log_path(session_id)
        if not path.exists():
            raise UnknownSession(f"no persisted session {session_id!r}")
        session: Session | None = None
        with open(path, encoding="utf-8") as f:
            for line in f:
                record = json.loads(line)
                if record["type"] == "created":
                    session = Session(
                        session_id=record["session_id"],
                        persona_id=record["persona_id"],
                        state="idle",
                        created_at=record["created_at"],
                        prompt_hash=record["prompt_hash"],
                    )
                elif record["type"] == "turn" and session is not None:
                    session.turns.append(Turn.from_dict(record["turn"]))
                elif record["type"] == "closed" and session is not None:
                    session.state = "closed"
        if session is None:
            raise UnknownSession(f"log for {session_id!r} has no creation record")
        return session

    def load_all(self) -> list[Session]:
        sessions = []
        for path in sorted(self.root.glob("*.jsonl")):
            sessions.append(self.load(path.stem))
        return sessions


class SessionManager:
    """Owns all live sessions; serializes per-session mutation."""

    def __init__(
        self,
        registry,
        store: AssetStore,
        providers: ProviderSet,
        instructions: RolePlayInstructions,
        session_store: SessionStore,
        dialogue_params: DialogueParams | None = None,
    ):
        self.registry = registry
        self.store = store
        self.providers = providers
        self.instructions = instructions
        self.session_store = session_store
        self.dialogue_params = dialogue_params or DialogueParams()
        self.pipeline = TurnPipeline(store=store, providers=providers)
        self.hub = EventHub()
        self._sessions: dict[str, Session] = {}
        self._locks: dict[str, threading.RLock] = {}
        self._global_lock = threading.Lock()

    # -- helpers -----------------------------------------------------------------

    def _session(self, session_id: str) -> tuple[Session, threading.RLock]:
        with self._global_lock:
            session = self._sessions.get(session_id)
            if session is None:
                raise UnknownSession(f"no session with id {session_id!r}")
            return session, self._locks[session_id]

    def _resolve_assets(self, profile: PatientProfile):
        if not self.store.has_voice(profile.voice_id):
            raise InvalidPersona(
                f"persona {profile.id!r} references unregistered voice {profile.voice_id!r}"
            )
        if not self.store.has_base_video(profile.base_video_id):
            raise InvalidPersona(
                f"persona {profile.id!r} references unregistered base video "
                f"{profile.base_video_id!r}"
            )

    # -- operations ---------------------------------------------------------------

    def create_session(self, persona_id: str) -> Session:
        profile, report = self.registry.get(persona_id)
        if profile is None and report is None:
            raise UnknownPersona(f"no persona with id {persona_id!r}")
        if report is not None and not report.ok:
            problems = "; ".join(f"{i.field_path}: {i.message}" for i in report.errors())
            raise InvalidPersona(f"persona {persona_id!r} fails validation: {problems}")
        self._resolve_assets(profile)
        bundle = assemble_prompt(profile, self.instructions)
        session = Session(
            session_id=new_session_id(),
            persona_id=persona_id,
            state="idle",
            created_at=_now_iso(),
            prompt_hash=bundle.content_hash,
            bundle=bundle,
            profile=profile,
        )
        with self._global_lock:
            self._sessions[session.session_id] = session
            self._locks[session.session_id] = threading.RLock()
        self.session_store.record_created(session)
        logger.info("session %s created for persona %s", session.session_id[:8], persona_id)
        return session

    def submit_turn(
        self,
        session_id: str,
        text: str | None = None,
        audio: AudioBlob | None = None,
        voice_params: VoiceParams | None = None,
    ) -> str:
        session, lock = self._session(session_id)
        with lock:
            if session.state == "closed" or session.closing:
                raise SessionClosed(f"session {session_id!r} is closed")
            if session.state != "idle":
                raise SessionBusy(f"session {session_id!r} has a turn in flight")
            if audio is None and (text is None or not text.strip()):
                raise EmptyInput("turn needs nonempty text or audio")
            if audio is not None and audio.is_empty():
                raise EmptyInput("turn audio contains no samples")
            if audio is not None:
                self.providers.require_transcriber()

            context = self._build_context(session, voice_params)
            job = PipelineJob(
                job_id=new_job_id(),
                session_id=session_id,
                turn_index=len(session.turns),
                text=text,
                audio=audio,
            )
            session.state = "processing"
            session.current_job_id = job.job_id
            try:
                self.pipeline.submit(
                    job, context,
                    emit=lambda event, s=session, j=job: self._on_event(s, j, event),
                )
            except Exception:
                session.state = "idle"
                session.current_job_id = None
                raise
        return job.job_id

    def _build_context(self, session: Session, voice_params: VoiceParams | None) -> TurnContext:
        profile = session.profile
        if profile is None:
            # reloaded session: re-resolve and honor the pinned prompt
            profile, report = self.registry.get(session.persona_id)
            if profile is None:
                raise UnknownPersona(f"persona {session.persona_id!r} no longer exists")
            if report is not None and not report.ok:
                raise InvalidPersona(f"persona {session.persona_id!r} no longer validates")
            session.profile = profile
        if session.bundle is None:
            bundle = assemble_prompt(session.profile, self.instructions)
            if bundle.content_hash != session.prompt_hash:
                raise InvalidPersona(
                    "persona prompt changed since this session was created; "
                    "open a new session"
                )
            session.bundle = bundle
        self._resolve_assets(session.profile)
        voice = self.store.get_voice(session.profile.voice_id)
        _, base_path = self.store.get_base_video(session.profile.base_video_id)
        history: list[tuple[str, str]] = []
        window = self.dialogue_params.history_window
        ok_turns = [t for t in session.turns if t.status == "ok"]
        for turn in ok_turns[-window:] if window else []:
            history.append((SPEAKER_LEARNER, turn.user_text))
            history.append((SPEAKER_PATIENT, turn.patient_text or ""))
        return TurnContext(
            persona_id=session.persona_id,
            prompt=session.bundle,
            history=history,
            dialogue_params=self.dialogue_params,
            voice=voice,
            voice_params=voice_params or voice.defaults,
            base_video=BaseVideoHandle(
                base_video_id=session.profile.base_video_id, path=str(base_path)
            ),
        )

    def _on_event(self, session: Session, job: PipelineJob, event: StageEvent):
        if event.stage in ("ready", "failed"):
            self._finalize_turn(session, job, event)
        self.hub.publish(session.session_id, job.job_id, job.turn_index, event)

    def _finalize_turn(self, session: Session, job: PipelineJob, event: StageEvent):
        handle = self.pipeline.get_handle(job.job_id)
        _, lock = self._session(session.session_id)
        with lock:
            if event.stage == "ready":
                result = handle.result
                turn = Turn(
                    index=job.turn_index,
                    status="ok",
                    user_text=result.user_text,
                    patient_text=result.patient_text,
                    clip_id=result.clip_id,
                    timings=result.timings,
                )
            else:
                cause = handle.error.code if handle.error else "internal"
                turn = Turn(
                    index=job.turn_index,
                    status="failed",
                    user_text=job.text or "",
                    cause=cause,
                )
            session.turns.append(turn)
            session.current_job_id = None
            if session.state != "closed":
                session.state = "closed" if session.closing else "idle"
            self.session_store.record_turn(session, turn)

    def get_session(self, session_id: str) -> Session:
        session, _ = self._session(session_id)
        return session

    def get_transcript(self, session_id: str) -> list[Turn]:
        session, lock = self._session(session_id)
        with lock:
            return list(session.turns)

    def close_session(self, session_id: str) -> Session:
        session, lock = self._session(session_id)
        with lock:
            if session.state == "closed":
                return session
            session.closing = True
            job_id = session.current_job_id
        if job_id is not None:
            try:
                self.pipeline.cancel(job_id)
                self.pipeline.get_handle(job_id).done.wait(30.0)
            except TelesimError:
                pass
        with lock:
            if session.state != "closed":
                session.state = "closed"
            self.session_store.record_closed(session)
        logger.info("session %s closed", session_id[:8])
        return session

    def wait_for_turn(self, session_id: str, job_id: str, timeout_s: float = 120.0):
        """Block until the job is terminal; returns the result or raises its cause."""
        self._session(session_id)
        return self.pipeline.wait(job_id, timeout_s)

    def session_references_clip(self, session_id: str, clip_id: str) -> bool:
        try:
            session, lock = self._session(session_id)
        except UnknownSession:
            return False
        with lock:
            return any(t.clip_id == clip_id for t in session.turns)

    def load_persisted(self):
        """Seed the manager with previously persisted sessions (transcript
        access and durability; reloaded sessions accept new turns only if
        the persona still renders to the pinned prompt)."""
        for session in self.session_store.load_all():
            with self._global_lock:
                if session.session_id not in self._sessions:
                    self._sessions[session.session_id] = session
                    self._locks[session.session_id] = threading.RLock()
