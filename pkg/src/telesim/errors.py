"""Typed error hierarchy shared by every subsystem.

Every error carries a stable ``code`` string; the gateway maps codes to
HTTP statuses and the CLI maps them to exit codes, so the same failure is
reported identically on every surface.
"""

from __future__ import annotations


class TelesimError(Exception):
    """Base class for all domain errors."""

    code = "internal"

    def __init__(self, message: str = "", *, detail: str | None = None):
        super().__init__(message or self.__class__.__name__)
        self.detail = detail


class ConfigError(TelesimError):
    code = "config_error"


# --- persona ---------------------------------------------------------------

class ProfileParseError(TelesimError):
    """Document is not a readable persona file (bad UTF-8 / JSON / shape)."""

    code = "parse_error"


class ProfileValidationError(TelesimError):
    """Profile violates one or more invariants; carries the full report."""

    code = "invalid_profile"

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


# --- providers ---------------------------------------------------------------

class ProviderError(TelesimError):
    code = "provider_error"


class ProviderTimeout(ProviderError):
    code = "provider_timeout"


class ProviderAuth(ProviderError):
    code = "provider_auth"


class ProviderRateLimit(ProviderError):
    code = "provider_rate_limit"


class ProviderDisabled(ProviderError):
    code = "provider_disabled"


class EmptySpeech(ProviderError):
    code = "empty_speech"


class ContextOverflow(ProviderError):
    code = "context_overflow"


class UnknownVoice(ProviderError):
    code = "unknown_voice"


class UnknownBaseVideo(ProviderError):
    code = "unknown_base_video"


class RenderFailure(ProviderError):
    code = "render_failure"


class AudioFormatError(TelesimError):
    code = "unsupported_media"


# --- assets ------------------------------------------------------------------

class UnknownAsset(TelesimError):
    code = "unknown_asset"


class ChecksumMismatch(TelesimError):
    code = "checksum_mismatch"


class CorruptFile(TelesimError):
    code = "corrupt_file"


class DuplicateIdMismatch(TelesimError):
    code = "duplicate_id_mismatch"


class ManifestMismatch(TelesimError):
    code = "manifest_mismatch"


# --- session / pipeline -------------------------------------------------------

class UnknownPersona(TelesimError):
    code = "unknown_persona"


class InvalidPersona(TelesimError):
    code = "invalid_persona"


class UnknownSession(TelesimError):
    code = "unknown_session"


class SessionBusy(TelesimError):
    code = "session_busy"


class SessionClosed(TelesimError):
    code = "session_closed"


class EmptyInput(TelesimError):
    code = "empty_input"


class UnknownJob(TelesimError):
    code = "unknown_job"


class TurnCancelled(TelesimError):
    """Raised inside a pipeline job when its cancellation token fires."""

    code = "cancelled"
