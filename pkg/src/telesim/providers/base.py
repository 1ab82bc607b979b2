"""Provider contracts shared by the remote, offline, and simulated bindings.

Each of the four capabilities (transcription, dialogue, speech synthesis,
lip-sync rendering) is a small stateless interface. Remote bindings speak
plain HTTPS with JSON envelopes; offline bindings are pure functions of
their inputs; simulated bindings wrap the offline ones with injected
delay for latency experiments.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import threading
import time
from dataclasses import dataclass, field

from ..audio import AudioBlob
from ..errors import (
    ConfigError,
    ProviderRateLimit,
    ProviderTimeout,
    TurnCancelled,
)
from ..persona import PromptBundle

logger = logging.getLogger(__name__)

PROVIDER_KINDS = ("transcriber", "dialogue", "synthesizer", "lipsync")
PROVIDER_MODES = ("remote", "offline", "simulated")

# Upper bound on how long a cancelled or timed-out call may linger.
POLL_INTERVAL_MS = 100

BACKOFF_BASE_MS = 500


@dataclass(frozen=True)
class ProviderConfig:
    """Endpoint/credential/timeout description for one capability binding.

    Credentials are referenced by environment variable name only; the
    secret value is read at call time and never stored or serialized.
    """

    kind: str
    mode: str
    endpoint: str | None = None
    credential_env: str | None = None
    timeout_ms: int = 30_000
    max_retries: int = 2
    simulated_delay_ms: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind not in PROVIDER_KINDS:
            raise ConfigError(f"unknown provider kind {self.kind!r}")
        if self.mode not in PROVIDER_MODES:
            raise ConfigError(f"unknown provider mode {self.mode!r}")
        if self.timeout_ms <= 0:
            raise ConfigError("timeout_ms must be positive")
        if self.max_retries < 0:
            raise ConfigError("max_retries must be >= 0")
        if self.mode == "remote" and not (self.endpoint and self.credential_env):
            raise ConfigError("remote mode requires endpoint and credential_env")
        if self.simulated_delay_ms is not None:
            lo, hi = self.simulated_delay_ms
            if lo < 0 or lo > hi:
                raise ConfigError("simulated_delay_ms must satisfy 0 <= lo <= hi")

    def to_public_dict(self) -> dict:
        """Serializable view; contains the credential variable NAME, never its value."""
        out = {
            "kind": self.kind,
            "mode": self.mode,
            "timeout_ms": self.timeout_ms,
            "max_retries": self.max_retries,
        }
        if self.endpoint:
            out["endpoint"] = self.endpoint
        if self.credential_env:
            out["credential_env"] = self.credential_env
        if self.simulated_delay_ms:
            out["simulated_delay_ms"] = list(self.simulated_delay_ms)
        return out


@dataclass(frozen=True)
class DialogueParams:
    temperature: float = 0.8
    max_reply_tokens: int = 400
    history_window: int = 20

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ConfigError("temperature must be in [0, 2]")
        if self.max_reply_tokens <= 0:
            raise ConfigError("max_reply_tokens must be positive")
        if self.history_window < 0:
            raise ConfigError("history_window must be >= 0")


@dataclass(frozen=True)
class VoiceParams:
    stability: float = 0.5
    similarity: float = 0.75
    style: float = 0.0

    def __post_init__(self):
        for name in ("stability", "similarity", "style"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")

    def as_key(self) -> str:
        return json.dumps(
            {"stability": self.stability, "similarity": self.similarity, "style": self.style},
            sort_keys=True,
            separators=(",", ":"),
        )


@dataclass(frozen=True)
class VoiceModelRef:
    """Handle to a provider-side voice model plus its tuned defaults."""

    voice_id: str
    handle: str
    defaults: VoiceParams = field(default_factory=VoiceParams)


@dataclass(frozen=True)
class ClipManifest:
    """What a rendered clip was made from; its canonical serialization is hashed
    to form the clip id."""

    base_video_id: str
    audio_sha256: str
    duration_ms: float

    def canonical_json(self) -> str:
        return json.dumps(
            {
                "audio_sha256": self.audio_sha256,
                "base_video_id": self.base_video_id,
                "duration_ms": self.duration_ms,
            },
            sort_keys=True,
            separators=(",", ":"),
        )

    def clip_id(self) -> str:
        return hashlib.sha256(self.canonical_json().encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ClipBlob:
    """A rendered audiovisual response; duration must agree with the manifest."""

    container: str
    data: bytes
    duration_ms: float
    manifest: ClipManifest

    @property
    def clip_id(self) -> str:
        return self.manifest.clip_id()


class CancelToken:
    """Cooperative cancellation: provider calls poll it or wait on it."""

    def __init__(self):
        self._event = threading.Event()

    def cancel(self):
        self._event.set()

    @property
    def cancelled(self) -> bool:
        return self._event.is_set()

    def raise_if_cancelled(self):
        if self._event.is_set():
            raise TurnCancelled("cancelled")

    def wait_ms(self, delay_ms: float):
        """Sleep for delay_ms, waking immediately (and raising) on cancellation."""
        if self._event.wait(delay_ms / 1000.0):
            raise TurnCancelled("cancelled")


NO_CANCEL = CancelToken()


@dataclass(frozen=True)
class BaseVideoHandle:
    """A resolved base-video asset: identity plus verified bytes on disk."""

    base_video_id: str
    path: str


class Transcriber:
    def transcribe(self, audio: AudioBlob, cancel: CancelToken = NO_CANCEL) -> str:
        raise NotImplementedError


class DialogueProvider:
    def generate_reply(
        self,
        prompt: PromptBundle,
        history: list[tuple[str, str]],
        user_text: str,
        params: DialogueParams,
        cancel: CancelToken = NO_CANCEL,
    ) -> str:
        raise NotImplementedError


class SpeechSynthesizer:
    def synthesize(
        self,
        text: str,
        voice: VoiceModelRef,
        params: VoiceParams,
        cancel: CancelToken = NO_CANCEL,
    ) -> AudioBlob:
        raise NotImplementedError


class LipsyncRenderer:
    def render(
        self,
        base_video: BaseVideoHandle,
        audio: AudioBlob,
        cancel: CancelToken = NO_CANCEL,
    ) -> ClipBlob:
        raise NotImplementedError


def run_with_retries(call, config: ProviderConfig, cancel: CancelToken = NO_CANCEL):
    """Run ``call()`` under the config's retry policy and timeout budget.

    Retries apply only to timeouts and rate limits, never to auth errors.
    Backoff is exponential from BACKOFF_BASE_MS with jitter, capped so the
    whole operation (attempts plus backoff) stays within timeout_ms.
    """
    deadline = time.monotonic() + config.timeout_ms / 1000.0
    attempt = 0
    while True:
        cancel.raise_if_cancelled()
        try:
            return call(deadline)
        except (ProviderTimeout, ProviderRateLimit) as exc:
            attempt += 1
            remaining_ms = (deadline - time.monotonic()) * 1000.0
            if remaining_ms <= 0 and not isinstance(exc, ProviderTimeout):
                raise ProviderTimeout(
                    f"{config.kind} call exhausted its {config.timeout_ms} ms budget"
                ) from exc
            if attempt > config.max_retries or remaining_ms <= 0:
                raise
            backoff_ms = BACKOFF_BASE_MS * (2 ** (attempt - 1))
            backoff_ms *= random.uniform(0.5, 1.0)
            backoff_ms = min(backoff_ms, max(remaining_ms, 0.0))
            logger.debug(
                "%s call attempt %d failed (%s); retrying in %.0f ms",
                config.kind, attempt, exc.code, backoff_ms,
            )
            cancel.wait_ms(backoff_ms)
