"""Canonical audio interchange format: 16 kHz mono PCM16 WAV.

One fixed format keeps hashing, duration math, and the lip-sync contract
trivial: at 16 kHz a millisecond is exactly 16 samples, so
``duration_ms = sample_count / 16`` with no rounding.
"""

from __future__ import annotations

import io
import math
import struct
import wave
from dataclasses import dataclass, field

from .errors import AudioFormatError

SAMPLE_RATE = 16_000
SAMPLES_PER_MS = SAMPLE_RATE // 1000
CANONICAL_FORMAT = "wav_pcm16_mono_16k"


@dataclass(frozen=True)
class AudioBlob:
    """Audio in the canonical WAV format, plus an optional sidecar transcript.

    The sidecar carries ground-truth text along with fixture audio so the
    offline transcriber can echo it back deterministically.
    """

    data: bytes
    format: str = CANONICAL_FORMAT
    transcript: str | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.format != CANONICAL_FORMAT:
            raise AudioFormatError(f"unsupported audio format {self.format!r}")
        # validates header eagerly so a malformed blob never enters the system
        object.__setattr__(self, "_sample_count", _parse_wav(self.data))

    @property
    def sample_count(self) -> int:
        return self._sample_count

    @property
    def duration_ms(self) -> float:
        return self._sample_count / SAMPLES_PER_MS

    def is_empty(self) -> bool:
        return self._sample_count == 0


def _parse_wav(data: bytes) -> int:
    """Return the sample count of canonical WAV bytes, or raise AudioFormatError."""
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise AudioFormatError("not a RIFF/WAVE file")
    try:
        with wave.open(io.BytesIO(data), "rb") as wav:
            channels = wav.getnchannels()
            width = wav.getsampwidth()
            rate = wav.getframerate()
            frames = wav.getnframes()
    except wave.Error as exc:
        raise AudioFormatError(f"unreadable WAV: {exc}") from exc
    if (channels, width, rate) != (1, 2, SAMPLE_RATE):
        raise AudioFormatError(
            f"expected mono PCM16 at {SAMPLE_RATE} Hz, "
            f"got {channels} ch / {8 * width} bit / {rate} Hz"
        )
    return frames


def encode_wav(samples: bytes) -> bytes:
    """Wrap raw little-endian PCM16 sample bytes in a canonical WAV container."""
    buf = io.BytesIO()
    with wave.open(buf, "wb") as wav:
        wav.setnchannels(1)
        wav.setsampwidth(2)
        wav.setframerate(SAMPLE_RATE)
        wav.writeframes(samples)
    return buf.getvalue()


def sine_wave(duration_ms: float, frequency_hz: float = 440.0, amplitude: float = 0.3) -> AudioBlob:
    """Deterministic sine tone of the given duration in the canonical format."""
    n = round(duration_ms * SAMPLES_PER_MS)
    peak = amplitude * 32767.0
    step = 2.0 * math.pi * frequency_hz / SAMPLE_RATE
    pcm = struct.pack("<%dh" % n, *(int(peak * math.sin(step * i)) for i in range(n)))
    return AudioBlob(data=encode_wav(pcm))


def silence(duration_ms: float) -> AudioBlob:
    n = round(duration_ms * SAMPLES_PER_MS)
    return AudioBlob(data=encode_wav(b"\x00\x00" * n))
