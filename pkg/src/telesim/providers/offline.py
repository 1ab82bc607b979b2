"""Deterministic offline bindings for all four capabilities.

These run with no network, no credentials, and no randomness: equal
inputs always produce byte-equal outputs. They carry the full pipeline in
development, tests, and demos.
"""

from __future__ import annotations

import hashlib
import re

from ..audio import AudioBlob, sine_wave
from ..errors import ContextOverflow, EmptyInput, EmptySpeech
from ..persona import PromptBundle, extract_prompt_fields
from .base import (
    NO_CANCEL,
    BaseVideoHandle,
    CancelToken,
    ClipBlob,
    ClipManifest,
    DialogueParams,
    DialogueProvider,
    LipsyncRenderer,
    SpeechSynthesizer,
    Transcriber,
    VoiceModelRef,
    VoiceParams,
)

# Offline synthesis pacing: each whitespace-separated word becomes 250 ms
# of tone, so durations are a pure function of the text.
MS_PER_WORD = 250
TONE_HZ = 440.0

PREVIEW_CHARS = 40

_SENTENCE_END = re.compile(r"[.!?]")


def first_sentence(text: str) -> str:
    """Text up to and including the first sentence terminator."""
    stripped = text.strip()
    match = _SENTENCE_END.search(stripped)
    if match:
        return stripped[: match.end()]
    return stripped


class OfflineTranscriber(Transcriber):
    """Echoes the sidecar transcript; otherwise derives text from the audio hash."""

    def transcribe(self, audio: AudioBlob, cancel: CancelToken = NO_CANCEL) -> str:
        cancel.raise_if_cancelled()
        if audio.is_empty():
            raise EmptySpeech("audio contains no samples")
        if audio.transcript is not None:
            if not audio.transcript.strip():
                raise EmptySpeech("sidecar transcript is empty")
            return audio.transcript
        return hashlib.sha256(audio.data).digest()[:8].hex()


class OfflineDialogue(DialogueProvider):
    """Templated persona-flavored reply, pure in (prompt, user_text).

    Reply shape: ``As <display name>: regarding "<first 40 chars of the
    question>" — <first sentence of the profile's disease understanding>``.
    """

    def __init__(self, context_limit: int = 400):
        self.context_limit = context_limit

    def generate_reply(
        self,
        prompt: PromptBundle,
        history: list[tuple[str, str]],
        user_text: str,
        params: DialogueParams,
        cancel: CancelToken = NO_CANCEL,
    ) -> str:
        cancel.raise_if_cancelled()
        if not user_text.strip():
            raise EmptyInput("user_text must not be empty")
        if len(history) > self.context_limit:
            raise ContextOverflow(
                f"history of {len(history)} entries exceeds offline limit {self.context_limit}"
            )
        fields = extract_prompt_fields(prompt.system_text)
        name = fields.get("display_name", prompt.profile_id)
        understanding = first_sentence(fields.get("disease_understanding", ""))
        return f'As {name}: regarding "{user_text[:PREVIEW_CHARS]}" — {understanding}'


class OfflineSynthesizer(SpeechSynthesizer):
    """440 Hz tone whose length follows the fixed per-word pacing."""

    def synthesize(
        self,
        text: str,
        voice: VoiceModelRef,
        params: VoiceParams,
        cancel: CancelToken = NO_CANCEL,
    ) -> AudioBlob:
        cancel.raise_if_cancelled()
        if not text.strip():
            raise EmptyInput("text must not be empty")
        word_count = len(text.split())
        return sine_wave(duration_ms=MS_PER_WORD * word_count, frequency_hz=TONE_HZ)


class OfflineLipsync(LipsyncRenderer):
    """Audio-only stand-in clip: echoes the driving WAV under a manifest.

    The manifest binds (base_video_id, audio hash, duration); its
    canonical JSON hash is the clip id, so identical inputs always yield
    the identical clip. Remote adapters return real video containers.
    """

    def render(
        self,
        base_video: BaseVideoHandle,
        audio: AudioBlob,
        cancel: CancelToken = NO_CANCEL,
    ) -> ClipBlob:
        cancel.raise_if_cancelled()
        if audio.is_empty():
            raise EmptyInput("driving audio must not be empty")
        manifest = ClipManifest(
            base_video_id=base_video.base_video_id,
            audio_sha256=hashlib.sha256(audio.data).hexdigest(),
            duration_ms=audio.duration_ms,
        )
        return ClipBlob(
            container="wav",
            data=audio.data,
            duration_ms=audio.duration_ms,
            manifest=manifest,
        )
