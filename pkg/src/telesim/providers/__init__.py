"""Pluggable bindings for the four external AI capabilities.

``build_provider`` maps a ProviderConfig to a concrete binding; a
ProviderSet bundles one binding per capability for the pipeline. The
module-level ``transcribe`` / ``generate_reply`` / ``synthesize`` /
``render_lipsync`` helpers build a one-shot binding from a config, for
callers that do not hold a ProviderSet.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..audio import AudioBlob
from ..errors import ConfigError, ProviderDisabled
from ..persona import PromptBundle
from .base import (
    NO_CANCEL,
    POLL_INTERVAL_MS,
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
)
from .offline import OfflineDialogue, OfflineLipsync, OfflineSynthesizer, OfflineTranscriber
from .remote import RemoteDialogue, RemoteLipsync, RemoteSynthesizer, RemoteTranscriber
from .simulated import (
    SimulatedDialogue,
    SimulatedLipsync,
    SimulatedSynthesizer,
    SimulatedTranscriber,
)

__all__ = [
    "AudioBlob",
    "BaseVideoHandle",
    "CancelToken",
    "ClipBlob",
    "ClipManifest",
    "DialogueParams",
    "DialogueProvider",
    "LipsyncRenderer",
    "POLL_INTERVAL_MS",
    "ProviderConfig",
    "ProviderSet",
    "SpeechSynthesizer",
    "Transcriber",
    "VoiceModelRef",
    "VoiceParams",
    "build_provider",
    "transcribe",
    "generate_reply",
    "synthesize",
    "render_lipsync",
]

_OFFLINE = {
    "transcriber": OfflineTranscriber,
    "dialogue": OfflineDialogue,
    "synthesizer": OfflineSynthesizer,
    "lipsync": OfflineLipsync,
}

_SIMULATED = {
    "transcriber": SimulatedTranscriber,
    "dialogue": SimulatedDialogue,
    "synthesizer": SimulatedSynthesizer,
    "lipsync": SimulatedLipsync,
}

_REMOTE = {
    "transcriber": RemoteTranscriber,
    "dialogue": RemoteDialogue,
    "synthesizer": RemoteSynthesizer,
    "lipsync": RemoteLipsync,
}


def build_provider(config: ProviderConfig, **kwargs):
    """Instantiate the binding a config describes."""
    if config.mode == "offline":
        return _OFFLINE[config.kind]()
    if config.mode == "simulated":
        if config.simulated_delay_ms is None:
            raise ConfigError("simulated mode requires simulated_delay_ms")
        return _SIMULATED[config.kind](config.simulated_delay_ms, **kwargs)
    return _REMOTE[config.kind](config, **kwargs)


@dataclass
class ProviderSet:
    """One binding per capability; a missing transcriber means the
    deployment is text-only."""

    transcriber: Transcriber | None
    dialogue: DialogueProvider
    synthesizer: SpeechSynthesizer
    lipsync: LipsyncRenderer

    @classmethod
    def offline(cls) -> "ProviderSet":
        return cls(
            transcriber=OfflineTranscriber(),
            dialogue=OfflineDialogue(),
            synthesizer=OfflineSynthesizer(),
            lipsync=OfflineLipsync(),
        )

    @classmethod
    def from_configs(cls, configs: dict[str, ProviderConfig | None]) -> "ProviderSet":
        def build(kind: str):
            config = configs.get(kind)
            if config is None:
                return None
            if config.kind != kind:
                raise ConfigError(f"config for {kind!r} slot has kind {config.kind!r}")
            return build_provider(config)

        dialogue = build("dialogue")
        synthesizer = build("synthesizer")
        lipsync = build("lipsync")
        if dialogue is None or synthesizer is None or lipsync is None:
            raise ConfigError("dialogue, synthesizer, and lipsync providers are required")
        return cls(
            transcriber=build("transcriber"),
            dialogue=dialogue,
            synthesizer=synthesizer,
            lipsync=lipsync,
        )

    def require_transcriber(self) -> Transcriber:
        if self.transcriber is None:
            raise ProviderDisabled(
                "no transcriber configured: this deployment accepts text questions only"
            )
        return self.transcriber


def transcribe(audio: AudioBlob, config: ProviderConfig | None,
               cancel: CancelToken = NO_CANCEL) -> str:
    if config is None:
        raise ProviderDisabled(
            "no transcriber configured: this deployment accepts text questions only"
        )
    if config.kind != "transcriber":
        raise ConfigError(f"expected a transcriber config, got {config.kind!r}")
    return build_provider(config).transcribe(audio, cancel)


def generate_reply(prompt: PromptBundle, history: list[tuple[str, str]], user_text: str,
                   params: DialogueParams, config: ProviderConfig,
                   cancel: CancelToken = NO_CANCEL) -> str:
    if config.kind != "dialogue":
        raise ConfigError(f"expected a dialogue config, got {config.kind!r}")
    return build_provider(config).generate_reply(prompt, history, user_text, params, cancel)


def synthesize(text: str, voice: VoiceModelRef, params: VoiceParams,
               config: ProviderConfig, cancel: CancelToken = NO_CANCEL) -> AudioBlob:
    if config.kind != "synthesizer":
        raise ConfigError(f"expected a synthesizer config, got {config.kind!r}")
    return build_provider(config).synthesize(text, voice, params, cancel)


def render_lipsync(base_video: BaseVideoHandle, audio: AudioBlob,
                   config: ProviderConfig, cancel: CancelToken = NO_CANCEL) -> ClipBlob:
    if config.kind != "lipsync":
        raise ConfigError(f"expected a lipsync config, got {config.kind!r}")
    return build_provider(config).render(base_video, audio, cancel)
