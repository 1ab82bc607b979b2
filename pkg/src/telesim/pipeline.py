"""One conversational turn through the staged media flow.

A turn travels received → [transcribing] → thinking → synthesizing →
rendering → ready (transcribing is skipped for text input); any error
collapses into a single terminal ``failed`` event carrying the typed
cause. Stage timestamps come from a monotonic clock and every provider
call is wrapped in its own timer, so the report path can attribute
latency stage by stage.
"""

from __future__ import annotations

import logging
import math
import secrets
import threading
import time
from dataclasses import dataclass, field

from .assets import AssetStore, CacheKey
from .audio import AudioBlob
from .errors import EmptyInput, SessionBusy, TelesimError, UnknownJob
from .persona import PromptBundle
from .providers import ProviderSet
from .providers.base import (
    BaseVideoHandle,
    CancelToken,
    DialogueParams,
    VoiceModelRef,
    VoiceParams,
)

logger = logging.getLogger(__name__)

STAGES = ("received", "transcribing", "thinking", "synthesizing", "rendering", "ready", "failed")
TERMINAL_STAGES = ("ready", "failed")

# Event order for a successful turn, by input kind.
CANONICAL_ORDER_TEXT = ("received", "thinking", "synthesizing", "rendering", "ready")
CANONICAL_ORDER_AUDIO = (
    "received", "transcribing", "thinking", "synthesizing", "rendering", "ready",
)

# Report keys, one per timed stage.
REPORT_STAGES = ("transcribing", "thinking", "synthesizing", "rendering")


def new_job_id() -> str:
    return secrets.token_hex(16)


@dataclass(frozen=True)
class PipelineJob:
    """One turn's trip through the pipeline; input is text or audio, never both."""

    job_id: str
    session_id: str
    turn_index: int
    text: str | None = None
    audio: AudioBlob | None = None
    created_at: float = field(default_factory=time.monotonic)

    def __post_init__(self):
        if (self.text is None) == (self.audio is None):
            raise EmptyInput("job needs exactly one of text or audio input")
        if self.turn_index < 0:
            raise ValueError("turn_index must be >= 0")


@dataclass(frozen=True)
class StageEvent:
    job_id: str
    stage: str
    at: float  # monotonic seconds
    detail: str | None = None


@dataclass(frozen=True)
class StageTimings:
    """Per-stage wall durations; overhead is everything the stages do not cover."""

    transcribe_ms: float | None
    dialogue_ms: float
    synthesize_ms: float
    render_ms: float
    render_skipped: bool
    total_ms: float

    @property
    def stage_sum_ms(self) -> float:
        return (self.transcribe_ms or 0.0) + self.dialogue_ms + self.synthesize_ms + self.render_ms

    @property
    def overhead_ms(self) -> float:
        return self.total_ms - self.stage_sum_ms

    def by_report_stage(self) -> dict[str, float | None]:
        return {
            "transcribing": self.transcribe_ms,
            "thinking": self.dialogue_ms,
            "synthesizing": self.synthesize_ms,
            "rendering": self.render_ms,
        }

    def to_dict(self) -> dict:
        return {
            "transcribe_ms": self.transcribe_ms,
            "dialogue_ms": self.dialogue_ms,
            "synthesize_ms": self.synthesize_ms,
            "render_ms": self.render_ms,
            "render_skipped": self.render_skipped,
            "total_ms": self.total_ms,
            "overhead_ms": self.overhead_ms,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "StageTimings":
        return cls(
            transcribe_ms=raw.get("transcribe_ms"),
            dialogue_ms=raw["dialogue_ms"],
            synthesize_ms=raw["synthesize_ms"],
            render_ms=raw["render_ms"],
            render_skipped=raw.get("render_skipped", False),
            total_ms=raw["total_ms"],
        )


@dataclass(frozen=True)
class TurnResult:
    user_text: str
    patient_text: str
    clip_id: str
    timings: StageTimings
    cache_hit: bool


@dataclass(frozen=True)
class TurnContext:
    """Everything a job needs besides its input: persona prompt, history,
    parameters, and resolved assets."""

    persona_id: str
    prompt: PromptBundle
    history: list[tuple[str, str]]
    dialogue_params: DialogueParams
    voice: VoiceModelRef
    voice_params: VoiceParams
    base_video: BaseVideoHandle


class JobHandle:
    """Mutable state of one submitted job: events, outcome, cancellation."""

    def __init__(self, job: PipelineJob, emit_external):
        self.job = job
        self.cancel_token = CancelToken()
        self.events: list[StageEvent] = []
        self.result: TurnResult | None = None
        self.error: TelesimError | None = None
        self.done = threading.Event()
        self._emit_external = emit_external
        self._lock = threading.Lock()

    @property
    def terminal(self) -> bool:
        return bool(self.events) and self.events[-1].stage in TERMINAL_STAGES

    def emit(self, stage: str, detail: str | None = None) -> StageEvent:
        with self._lock:
            if self.terminal:
                raise RuntimeError(f"stage {stage!r} emitted after terminal event")
            at = time.monotonic()
            if self.events and at < self.events[-1].at:
                at = self.events[-1].at
            event = StageEvent(job_id=self.job.job_id, stage=stage, at=at, detail=detail)
            self.events.append(event)
        if self._emit_external is not None:
            self._emit_external(event)
        return event


class TurnPipeline:
    """Executes turns on worker threads, one in-flight job per session."""

    def __init__(self, store: AssetStore, providers: ProviderSet):
        self.store = store
        self.providers = providers
        self._jobs: dict[str, JobHandle] = {}
        self._busy_sessions: set[str] = set()
        self._lock = threading.Lock()

    def submit(self, job: PipelineJob, context: TurnContext, emit=None) -> JobHandle:
        """Start a job on its own thread; rejects a second in-flight job
        for the same session rather than queueing it."""
        handle = JobHandle(job, emit)
        with self._lock:
            if job.session_id in self._busy_sessions:
                raise SessionBusy(f"session {job.session_id} already has a turn in flight")
            self._busy_sessions.add(job.session_id)
            self._jobs[job.job_id] = handle
        thread = threading.Thread(
            target=self._run, args=(handle, context), name=f"turn-{job.job_id[:8]}", daemon=True
        )
        thread.start()
        return handle

    def run_turn(self, job: PipelineJob, context: TurnContext, emit=None) -> TurnResult:
        """Synchronous execution on the calling thread; raises the typed
        cause on failure."""
        self.submit(job, context, emit)
        return self.wait(job.job_id, timeout_s=None)

    def check_cache(
        self, persona_id: str, patient_text: str, voice_params: VoiceParams
    ) -> str | None:
        """Exact-match clip lookup for a reply that may already be rendered."""
        return self.store.lookup_cache(
            CacheKey.for_reply(persona_id, patient_text, voice_params)
        )

    def cancel(self, job_id: str) -> str:
        """Cancel an in-flight job; acknowledges (no-op) once terminal."""
        handle = self._jobs.get(job_id)
        if handle is None:
            raise UnknownJob(f"no job with id {job_id!r}")
        if handle.terminal:
            return "already_terminal"
        handle.cancel_token.cancel()
        return "cancelling"

    def wait(self, job_id: str, timeout_s: float | None = 60.0) -> TurnResult:
        handle = self._jobs.get(job_id)
        if handle is None:
            raise UnknownJob(f"no job with id {job_id!r}")
        if not handle.done.wait(timeout_s):
            raise TimeoutError(f"job {job_id} still running after {timeout_s}s")
        if handle.error is not None:
            raise handle.error
        return handle.result

    def get_handle(self, job_id: str) -> JobHandle:
        handle = self._jobs.get(job_id)
        if handle is None:
            raise UnknownJob(f"no job with id {job_id!r}")
        return handle

    # -- execution -------------------------------------------------------------

    def _run(self, handle: JobHandle, context: TurnContext):
        job = handle.job
        terminal: tuple[str, str]
        try:
            handle.result = self._execute(handle, context)
            terminal = ("ready", handle.result.clip_id)
        except TelesimError as exc:
            handle.error = exc
            logger.info("turn %s failed: %s", job.job_id[:8], exc.code)
            terminal = ("failed", exc.code)
        except Exception as exc:  # pragma: no cover - defensive
            handle.error = TelesimError(f"unexpected failure: {type(exc).__name__}")
            logger.exception("turn %s crashed", job.job_id[:8])
            terminal = ("failed", "internal")
        # release the in-flight slot before the terminal event lands, so a
        # follow-up turn submitted the moment the client sees it is accepted
        with self._lock:
            self._busy_sessions.discard(job.session_id)
        try:
            handle.emit(terminal[0], detail=terminal[1])
        finally:
            handle.done.set()

    def _execute(self, handle: JobHandle, context: TurnContext) -> TurnResult:
        job = handle.job
        cancel = handle.cancel_token
        providers = self.providers

        started = handle.emit("received").at

        transcribe_ms: float | None = None
        if job.audio is not None:
            transcriber = providers.require_transcriber()
            handle.emit("transcribing")
            t0 = time.monotonic()
            user_text = transcriber.transcribe(job.audio, cancel)
            transcribe_ms = (time.monotonic() - t0) * 1000.0
        else:
            if not job.text or not job.text.strip():
                raise EmptyInput("text input must not be empty")
            user_text = job.text

        handle.emit("thinking")
        t0 = time.monotonic()
        patient_text = providers.dialogue.generate_reply(
            context.prompt, context.history, user_text, context.dialogue_params, cancel
        )
        dialogue_ms = (time.monotonic() - t0) * 1000.0

        handle.emit("synthesizing")
        t0 = time.monotonic()
        wav = providers.synthesizer.synthesize(
            patient_text, context.voice, context.voice_params, cancel
        )
        synthesize_ms = (time.monotonic() - t0) * 1000.0

        cache_key = CacheKey.for_reply(context.persona_id, patient_text, context.voice_params)
        cached_clip_id = self.store.lookup_cache(cache_key)
        if cached_clip_id is not None:
            handle.emit("rendering", detail="cache")
            clip_id = cached_clip_id
            render_ms = 0.0
            cache_hit = True
        else:
            handle.emit("rendering")
            t0 = time.monotonic()
            clip = providers.lipsync.render(context.base_video, wav, cancel)
            render_ms = (time.monotonic() - t0) * 1000.0
            cancel.raise_if_cancelled()  # a cancelled turn must store nothing
            record = self.store.store_clip(clip, cache_key)
            clip_id = record.clip_id
            cache_hit = False

        timings = StageTimings(
            transcribe_ms=transcribe_ms,
            dialogue_ms=dialogue_ms,
            synthesize_ms=synthesize_ms,
            render_ms=render_ms,
            render_skipped=cache_hit,
            total_ms=(time.monotonic() - started) * 1000.0,
        )
        return TurnResult(
            user_text=user_text,
            patient_text=patient_text,
            clip_id=clip_id,
            timings=timings,
            cache_hit=cache_hit,
        )


# -- latency reporting ---------------------------------------------------------


@dataclass(frozen=True)
class StageStats:
    mean_ms: float
    p50_ms: float
    p95_ms: float
    max_ms: float
    samples: int

    def to_dict(self) -> dict:
        return {
            "mean_ms": self.mean_ms,
            "p50_ms": self.p50_ms,
            "p95_ms": self.p95_ms,
            "max_ms": self.max_ms,
            "samples": self.samples,
        }


@dataclass(frozen=True)
class LatencyReport:
    turn_count: int
    stages: dict[str, StageStats]
    total: StageStats
    mean_total_ms: float
    dominant_stage: str

    def to_dict(self) -> dict:
        return {
            "turn_count": self.turn_count,
            "stages": {name: stats.to_dict() for name, stats in self.stages.items()},
            "total": self.total.to_dict(),
            "mean_total_ms": self.mean_total_ms,
            "dominant_stage": self.dominant_stage,
        }


def percentile(values: list[float], pct: float) -> float:
    """Nearest-rank percentile; a single sample is every percentile of itself."""
    if not values:
        raise EmptyInput("percentile of no samples")
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


def _stats(values: list[float]) -> StageStats:
    if not values:
        return StageStats(mean_ms=0.0, p50_ms=0.0, p95_ms=0.0, max_ms=0.0, samples=0)
    return StageStats(
        mean_ms=sum(values) / len(values),
        p50_ms=percentile(values, 50),
        p95_ms=percentile(values, 95),
        max_ms=max(values),
        samples=len(values),
    )


def latency_report(results: list[TurnResult]) -> LatencyReport:
    """Aggregate per-stage percentiles over a set of completed turns.

    dominant_stage is the stage with the largest mean duration; stages a
    turn did not run (no transcription for text input, skipped renders)
    contribute no sample.
    """
    if not results:
        raise EmptyInput("latency report needs at least one turn")
    per_stage: dict[str, list[float]] = {name: [] for name in REPORT_STAGES}
    totals: list[float] = []
    for result in results:
        totals.append(result.timings.total_ms)
        for name, value in result.timings.by_report_stage().items():
            if value is not None:
                per_stage[name].append(value)
    stages = {name: _stats(values) for name, values in per_stage.items()}
    dominant = max(REPORT_STAGES, key=lambda name: stages[name].mean_ms)
    return LatencyReport(
        turn_count=len(results),
        stages=stages,
        total=_stats(totals),
        mean_total_ms=sum(totals) / len(totals),
        dominant_stage=dominant,
    )
