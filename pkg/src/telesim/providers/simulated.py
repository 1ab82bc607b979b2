"""Latency-simulating bindings: offline behavior plus injected delay.

Exists to reproduce realistic provider latency profiles (tens of seconds
for lip-sync rendering on desktop-class hardware) without any external
service, so the latency report path can be exercised end to end.
"""

from __future__ import annotations

import random

from ..audio import AudioBlob
from ..errors import ConfigError
from ..persona import PromptBundle
from .base import (
    NO_CANCEL,
    BaseVideoHandle,
    CancelToken,
    ClipBlob,
    DialogueParams,
    DialogueProvider,
    LipsyncRenderer,
    SpeechSynthesizer,
    Transcriber,
    VoiceModelRef,
    VoiceParams,
)
from .offline import OfflineDialogue, OfflineLipsync, OfflineSynthesizer, OfflineTranscriber


class _Delay:
    def __init__(self, delay_range_ms: tuple[int, int], rng: random.Random | None = None):
        lo, hi = delay_range_ms
        if lo < 0 or lo > hi:
            raise ConfigError("delay range must satisfy 0 <= lo <= hi")
        self.range_ms = (lo, hi)
        self.rng = rng or random.Random()

    def sleep(self, cancel: CancelToken):
        delay = self.rng.uniform(*self.range_ms)
        cancel.wait_ms(delay)


class SimulatedTranscriber(Transcriber):
    def __init__(self, delay_range_ms: tuple[int, int], rng: random.Random | None = None):
        self._delay = _Delay(delay_range_ms, rng)
        self._inner = OfflineTranscriber()

    def transcribe(self, audio: AudioBlob, cancel: CancelToken = NO_CANCEL) -> str:
        self._delay.sleep(cancel)
        return self._inner.transcribe(audio, cancel)


class SimulatedDialogue(DialogueProvider):
    def __init__(self, delay_range_ms: tuple[int, int], rng: random.Random | None = None):
        self._delay = _Delay(delay_range_ms, rng)
        self._inner = OfflineDialogue()

    def generate_reply(
        self,
        prompt: PromptBundle,
        history: list[tuple[str, str]],
        user_text: str,
        params: DialogueParams,
        cancel: CancelToken = NO_CANCEL,
    ) -> str:
        self._delay.sleep(cancel)
        return self._inner.generate_reply(prompt, history, user_text, params, cancel)


class SimulatedSynthesizer(SpeechSynthesizer):
    def __init__(self, delay_range_ms: tuple[int, int], rng: random.Random | None = None):
        self._delay = _Delay(delay_range_ms, rng)
        self._inner = OfflineSynthesizer()

    def synthesize(
        self,
        text: str,
        voice: VoiceModelRef,
        params: VoiceParams,
        cancel: CancelToken = NO_CANCEL,
    ) -> AudioBlob:
        self._delay.sleep(cancel)
        return self._inner.synthesize(text, voice, params, cancel)


class SimulatedLipsync(LipsyncRenderer):
    def __init__(self, delay_range_ms: tuple[int, int], rng: random.Random | None = None):
        self._delay = _Delay(delay_range_ms, rng)
        self._inner = OfflineLipsync()

    def render(
        self,
        base_video: BaseVideoHandle,
        audio: AudioBlob,
        cancel: CancelToken = NO_CANCEL,
    ) -> ClipBlob:
        self._delay.sleep(cancel)
        return self._inner.render(base_video, audio, cancel)
