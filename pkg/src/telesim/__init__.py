"""Telehealth conversation simulation platform.

Declarative patient personas become live, turn-based audiovisual
encounters through a staged pipeline (transcribe → dialogue → speech →
lip-sync) over pluggable providers, with deterministic offline bindings
for development and testing.
"""

__version__ = "0.1.0"

from .audio import AudioBlob, sine_wave
from .errors import TelesimError
from .persona import (
    PatientProfile,
    PromptBundle,
    RolePlayInstructions,
    ValidationReport,
    assemble_prompt,
    load_profile,
    serialize_profile,
    validate_profile,
)
from .pipeline import LatencyReport, PipelineJob, StageTimings, TurnResult, latency_report
from .providers import DialogueParams, ProviderConfig, ProviderSet, VoiceParams
from .runtime import Platform, build_platform, materialize_fixtures

__all__ = [
    "AudioBlob",
    "DialogueParams",
    "LatencyReport",
    "PatientProfile",
    "PipelineJob",
    "Platform",
    "PromptBundle",
    "ProviderConfig",
    "ProviderSet",
    "RolePlayInstructions",
    "StageTimings",
    "TelesimError",
    "TurnResult",
    "ValidationReport",
    "VoiceParams",
    "assemble_prompt",
    "build_platform",
    "latency_report",
    "load_profile",
    "materialize_fixtures",
    "serialize_profile",
    "sine_wave",
    "validate_profile",
    "__version__",
]
