"""Remote HTTP bindings: plain HTTPS with JSON envelopes, no vendor SDKs.

Any vendor is an adapter behind these envelopes (documented in
``docs/provider-envelopes.md``). Credentials come from the environment
variable named in the config and are attached as a bearer token at call
time; the secret value is never logged, stored, or echoed in errors.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import os
import time

import httpx

from ..audio import AudioBlob
from ..errors import (
    ContextOverflow,
    EmptySpeech,
    ProviderAuth,
    ProviderError,
    ProviderRateLimit,
    ProviderTimeout,
    RenderFailure,
    UnknownBaseVideo,
    UnknownVoice,
)
from ..persona import PromptBundle
from .base import (
    NO_CANCEL,
    BaseVideoHandle,
    CancelToken,
    ClipBlob,
    ClipManifest,
    DialogueParams,
    DialogueProvider,
    LipsyncRenderer,
    ProviderConfig,
    SpeechSynthesizer,
    Transcriber,
    VoiceModelRef,
    VoiceParams,
    run_with_retries,
)

logger = logging.getLogger(__name__)


class _RemoteBinding:
    def __init__(self, config: ProviderConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self._client = httpx.Client(transport=transport)

    def close(self):
        self._client.close()

    def _secret(self) -> str:
        value = os.environ.get(self.config.credential_env or "", "")
        if not value:
            raise ProviderAuth(
                f"credential environment variable {self.config.credential_env!r} is not set"
            )
        return value

    def _post(self, payload: dict, deadline: float) -> dict:
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            raise ProviderTimeout(f"{self.config.kind} call budget exhausted before request")
        headers = {"Authorization": f"Bearer {self._secret()}"}
        try:
            response = self._client.post(
                self.config.endpoint,
                json=payload,
                headers=headers,
                timeout=remaining,
            )
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"{self.config.kind} endpoint timed out") from exc
        except httpx.HTTPError as exc:
            raise ProviderError(f"{self.config.kind} transport failure: {type(exc).__name__}") from exc

        logger.debug("%s endpoint answered %d", self.config.kind, response.status_code)
        if response.status_code in (401, 403):
            raise ProviderAuth(f"{self.config.kind} endpoint rejected the credential")
        if response.status_code == 429:
            raise ProviderRateLimit(f"{self.config.kind} endpoint rate-limited the call")
        self._raise_for_status(response)
        try:
            return response.json()
        except ValueError as exc:
            raise ProviderError(f"{self.config.kind} endpoint returned malformed JSON") from exc

    def _raise_for_status(self, response: httpx.Response):
        if response.status_code >= 400:
            raise ProviderError(
                f"{self.config.kind} endpoint returned HTTP {response.status_code}"
            )

    def _call(self, payload: dict, cancel: CancelToken) -> dict:
        return run_with_retries(
            lambda deadline: self._post(payload, deadline), self.config, cancel
        )


class RemoteTranscriber(_RemoteBinding, Transcriber):
    def transcribe(self, audio: AudioBlob, cancel: CancelToken = NO_CANCEL) -> str:
        payload = {
            "format": audio.format,
            "audio_b64": base64.b64encode(audio.data).decode("ascii"),
        }
        body = self._call(payload, cancel)
        text = str(body.get("text", "")).strip()
        if not text:
            raise EmptySpeech("transcriber returned no text")
        return text


class RemoteDialogue(_RemoteBinding, DialogueProvider):
    def _raise_for_status(self, response: httpx.Response):
        if response.status_code == 413:
            raise ContextOverflow("dialogue endpoint rejected the context as too large")
        super()._raise_for_status(response)

    def generate_reply(
        self,
        prompt: PromptBundle,
        history: list[tuple[str, str]],
        user_text: str,
        params: DialogueParams,
        cancel: CancelToken = NO_CANCEL,
    ) -> str:
        payload = {
            "system": prompt.system_text,
            "messages": [{"speaker": s, "text": t} for s, t in history],
            "user_text": user_text,
            "temperature": params.temperature,
            "max_reply_tokens": params.max_reply_tokens,
        }
        body = self._call(payload, cancel)
        text = str(body.get("text", "")).strip()
        if not text:
            raise ProviderError("dialogue endpoint returned an empty reply")
        return text


class RemoteSynthesizer(_RemoteBinding, SpeechSynthesizer):
    def _raise_for_status(self, response: httpx.Response):
        if response.status_code == 404:
            raise UnknownVoice("synthesizer endpoint does not know the voice handle")
        super()._raise_for_status(response)

    def synthesize(
        self,
        text: str,
        voice: VoiceModelRef,
        params: VoiceParams,
        cancel: CancelToken = NO_CANCEL,
    ) -> AudioBlob:
        payload = {
            "text": text,
            "voice_handle": voice.handle,
            "stability": params.stability,
            "similarity": params.similarity,
            "style": params.style,
            "format": "wav_pcm16_mono_16k",
        }
        body = self._call(payload, cancel)
        try:
            data = base64.b64decode(body["audio_b64"])
        except (KeyError, ValueError) as exc:
            raise ProviderError("synthesizer endpoint returned no decodable audio") from exc
        return AudioBlob(data=data)


class RemoteLipsync(_RemoteBinding, LipsyncRenderer):
    def _raise_for_status(self, response: httpx.Response):
        if response.status_code == 404:
            raise UnknownBaseVideo("lip-sync endpoint does not know the base video")
        if response.status_code >= 500:
            raise RenderFailure(f"lip-sync endpoint failed with HTTP {response.status_code}")
        super()._raise_for_status(response)

    def render(
        self,
        base_video: BaseVideoHandle,
        audio: AudioBlob,
        cancel: CancelToken = NO_CANCEL,
    ) -> ClipBlob:
        with open(base_video.path, "rb") as f:
            video_bytes = f.read()
        payload = {
            "base_video_id": base_video.base_video_id,
            "base_video_b64": base64.b64encode(video_bytes).decode("ascii"),
            "audio_b64": base64.b64encode(audio.data).decode("ascii"),
        }
        body = self._call(payload, cancel)
        try:
            data = base64.b64decode(body["clip_b64"])
            container = str(body.get("container", "mp4"))
        except (KeyError, ValueError) as exc:
            raise RenderFailure("lip-sync endpoint returned no decodable clip") from exc
        manifest = ClipManifest(
            base_video_id=base_video.base_video_id,
            audio_sha256=hashlib.sha256(audio.data).hexdigest(),
            duration_ms=audio.duration_ms,
        )
        return ClipBlob(
            container=container,
            data=data,
            duration_ms=audio.duration_ms,
            manifest=manifest,
        )
