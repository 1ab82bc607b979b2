"""Content-addressed registry for the media the runtime consumes.

Three kinds live here: base videos (lip-sync templates), voice model
references, and generated clips. On-disk layout is deliberately plain and
inspectable, with no database:

    <root>/<kind>/index.json            one JSON index per kind
    <root>/<kind>/<id[:2]>/<id>         the asset bytes

Every index row records a SHA-256 checksum that is verified on read, and
all writes publish via write-to-temp + atomic rename, so a crash leaves
either no entry or a complete verified one.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .errors import (
    ChecksumMismatch,
    ConfigError,
    CorruptFile,
    DuplicateIdMismatch,
    ManifestMismatch,
    UnknownAsset,
)
from .providers.base import ClipBlob, ClipManifest, VoiceModelRef, VoiceParams
from . import audio as audio_codec

logger = logging.getLogger(__name__)

KINDS = ("base_video", "voice", "clip")
INDEX_VERSION = 1

DEFAULT_CLIP_BUDGET_BYTES = 2 * 1024 * 1024 * 1024  # LRU eviction threshold


@dataclass(frozen=True)
class BaseVideo:
    base_video_id: str
    path: str  # relative to store root
    duration_ms: float
    loopable: bool  # declared by the registrar: first/last frames match
    checksum: str
    content_type: str = "application/octet-stream"


@dataclass(frozen=True)
class CacheKey:
    """Exact-match clip cache key: persona, reply text hash, voice settings."""

    persona_id: str
    reply_sha256: str
    voice_params: VoiceParams

    @classmethod
    def for_reply(cls, persona_id: str, reply_text: str, voice_params: VoiceParams) -> "CacheKey":
        digest = hashlib.sha256(reply_text.encode("utf-8")).hexdigest()
        return cls(persona_id=persona_id, reply_sha256=digest, voice_params=voice_params)

    def as_string(self) -> str:
        return f"{self.persona_id}:{self.reply_sha256}:{self.voice_params.as_key()}"


@dataclass(frozen=True)
class ClipRecord:
    clip_id: str
    manifest: ClipManifest
    path: str
    container: str
    size_bytes: int
    checksum: str
    created_at: float
    cache_keys: tuple[str, ...]


@dataclass(frozen=True)
class FsckProblem:
    kind: str
    asset_id: str
    problem: str  # "missing_file" | "checksum_mismatch" | "orphan_file"


@dataclass(frozen=True)
class FsckReport:
    checked: int
    problems: tuple[FsckProblem, ...]

    @property
    def ok(self) -> bool:
        return not self.problems


def _sha256_file(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _atomic_write(path: Path, data: bytes):
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())
    os.replace(tmp, path)


class AssetStore:
    """Filesystem-backed store with per-kind serialized writers."""

    def __init__(self, root: str | Path, clip_budget_bytes: int = DEFAULT_CLIP_BUDGET_BYTES):
        self.root = Path(root)
        self.clip_budget_bytes = clip_budget_bytes
        self._locks = {kind: threading.RLock() for kind in KINDS}
        self._indexes: dict[str, dict] = {}
        for kind in KINDS:
            self._indexes[kind] = self._load_index(kind)

    # -- index plumbing ------------------------------------------------------

    def _index_path(self, kind: str) -> Path:
        return self.root / kind / "index.json"

    def _load_index(self, kind: str) -> dict:
        path = self._index_path(kind)
        if not path.exists():
            return {"version": INDEX_VERSION, "entries": {}}
        with open(path, "rb") as f:
            index = json.load(f)
        if index.get("version") != INDEX_VERSION:
            raise ConfigError(f"unsupported {kind} index version {index.get('version')!r}")
        return index

    def _save_index(self, kind: str):
        data = json.dumps(self._indexes[kind], indent=2, sort_keys=True).encode("utf-8")
        _atomic_write(self._index_path(kind), data)

    def _object_relpath(self, kind: str, asset_id: str) -> str:
        return f"{kind}/{asset_id[:2]}/{asset_id}"

    def _entries(self, kind: str) -> dict:
        return self._indexes[kind]["entries"]

    def _verified_bytes(self, kind: str, asset_id: str, entry: dict) -> bytes:
        path = self.root / entry["path"]
        try:
            data = path.read_bytes()
        except OSError as exc:
            raise ChecksumMismatch(f"{kind} {asset_id!r}: file missing or unreadable") from exc
        if hashlib.sha256(data).hexdigest() != entry["checksum"]:
            raise ChecksumMismatch(f"{kind} {asset_id!r}: stored bytes fail checksum")
        return data

    # -- generic operations ----------------------------------------------------

    def register_asset(self, kind: str, file: str | Path, metadata: dict) -> str:
        """Register a file under a kind; identical bytes re-register as the same id.

        Base videos and voices may declare an id in metadata; undeclared
        ids derive from the content hash. A declared id bound to
        different bytes is rejected.
        """
        if kind == "base_video":
            return self._register_base_video_file(Path(file), metadata)
        if kind == "voice":
            return self.register_voice_file(Path(file)).voice_id
        raise ConfigError(f"cannot register kind {kind!r} directly; clips come from store_clip")

    def get_asset(self, asset_id: str) -> tuple[str, dict]:
        """Locate an id across kinds; returns (kind, index entry) after
        verifying the stored bytes."""
        for kind in KINDS:
            entry = self._entries(kind).get(asset_id)
            if entry is not None:
                self._verified_bytes(kind, asset_id, entry)
                return kind, dict(entry)
        raise UnknownAsset(f"no asset with id {asset_id!r}")

    # -- base videos ----------------------------------------------------------

    def _register_base_video_file(self, file: Path, metadata: dict) -> str:
        try:
            data = file.read_bytes()
        except OSError as exc:
            raise CorruptFile(f"cannot read {file}: {exc}") from exc
        if not data:
            raise CorruptFile(f"{file} is empty")
        return self.register_base_video(
            data,
            base_video_id=metadata.get("id"),
            duration_ms=float(metadata.get("duration_ms", 0.0)),
            loopable=bool(metadata.get("loopable", False)),
            content_type=metadata.get("content_type", "application/octet-stream"),
        ).base_video_id

    def register_base_video(
        self,
        data: bytes,
        *,
        base_video_id: str | None = None,
        duration_ms: float,
        loopable: bool,
        content_type: str = "application/octet-stream",
    ) -> BaseVideo:
        checksum = hashlib.sha256(data).hexdigest()
        asset_id = base_video_id or checksum[:16]
        with self._locks["base_video"]:
            entries = self._entries("base_video")
            existing = entries.get(asset_id)
            if existing is not None:
                if existing["checksum"] != checksum:
                    raise DuplicateIdMismatch(
                        f"base video {asset_id!r} already registered with different bytes"
                    )
                return self._base_video_from_entry(asset_id, existing)
            relpath = self._object_relpath("base_video", asset_id)
            _atomic_write(self.root / relpath, data)
            entries[asset_id] = {
                "path": relpath,
                "checksum": checksum,
                "duration_ms": duration_ms,
                "loopable": loopable,
                "content_type": content_type,
                "created_at": time.time(),
            }
            self._save_index("base_video")
            return self._base_video_from_entry(asset_id, entries[asset_id])

    def _base_video_from_entry(self, asset_id: str, entry: dict) -> BaseVideo:
        return BaseVideo(
            base_video_id=asset_id,
            path=entry["path"],
            duration_ms=entry["duration_ms"],
            loopable=entry["loopable"],
            checksum=entry["checksum"],
            content_type=entry.get("content_type", "application/octet-stream"),
        )

    def get_base_video(self, base_video_id: str) -> tuple[BaseVideo, Path]:
        entry = self._entries("base_video").get(base_video_id)
        if entry is None:
            raise UnknownAsset(f"no base video with id {base_video_id!r}")
        self._verified_bytes("base_video", base_video_id, entry)
        return self._base_video_from_entry(base_video_id, entry), self.root / entry["path"]

    def has_base_video(self, base_video_id: str) -> bool:
        return base_video_id in self._entries("base_video")

    # -- voices -----------------------------------------------------------------

    def register_voice_file(self, file: Path) -> VoiceModelRef:
        try:
            data = file.read_bytes()
        except OSError as exc:
            raise CorruptFile(f"cannot read {file}: {exc}") from exc
        try:
            raw = json.loads(data.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise CorruptFile(f"{file} is not a voice JSON document: {exc}") from exc
        defaults = raw.get("defaults", {})
        voice = VoiceModelRef(
            voice_id=raw.get("voice_id", ""),
            handle=raw.get("handle", ""),
            defaults=VoiceParams(
                stability=float(defaults.get("stability", 0.5)),
                similarity=float(defaults.get("similarity", 0.75)),
                style=float(defaults.get("style", 0.0)),
            ),
        )
        return self.register_voice(voice)

    def register_voice(self, voice: VoiceModelRef) -> VoiceModelRef:
        if not voice.voice_id or not voice.handle:
            raise ConfigError("voice registration needs voice_id and handle")
        doc = json.dumps(
            {
                "voice_id": voice.voice_id,
                "handle": voice.handle,
                "defaults": {
                    "stability": voice.defaults.stability,
                    "similarity": voice.defaults.similarity,
                    "style": voice.defaults.style,
                },
            },
            sort_keys=True,
            separators=(",", ":"),
        ).encode("utf-8")
        checksum = hashlib.sha256(doc).hexdigest()
        with self._locks["voice"]:
            entries = self._entries("voice")
            existing = entries.get(voice.voice_id)
            if existing is not None:
                if existing["checksum"] != checksum:
                    raise DuplicateIdMismatch(
                        f"voice {voice.voice_id!r} already registered with different settings"
                    )
                return voice
            relpath = self._object_relpath("voice", voice.voice_id)
            _atomic_write(self.root / relpath, doc)
            entries[voice.voice_id] = {
                "path": relpath,
                "checksum": checksum,
                "handle": voice.handle,
                "created_at": time.time(),
            }
            self._save_index("voice")
        return voice

    def get_voice(self, voice_id: str) -> VoiceModelRef:
        entry = self._entries("voice").get(voice_id)
        if entry is None:
            raise UnknownAsset(f"no voice with id {voice_id!r}")
        raw = json.loads(self._verified_bytes("voice", voice_id, entry).decode("utf-8"))
        defaults = raw["defaults"]
        return VoiceModelRef(
            voice_id=raw["voice_id"],
            handle=raw["handle"],
            defaults=VoiceParams(
                stability=defaults["stability"],
                similarity=defaults["similarity"],
                style=defaults["style"],
            ),
        )

    def has_voice(self, voice_id: str) -> bool:
        return voice_id in self._entries("voice")

    # -- clips -------------------------------------------------------------------

    def store_clip(self, clip: ClipBlob, cache_key: CacheKey) -> ClipRecord:
        """Persist a rendered clip, retrievable by clip id and by cache key.

        Identical manifests deduplicate to one stored object; additional
        cache keys simply alias it.
        """
        self._check_manifest(clip)
        clip_id = clip.manifest.clip_id()
        key = cache_key.as_string()
        with self._locks["clip"]:
            entries = self._entries("clip")
            entry = entries.get(clip_id)
            if entry is None:
                relpath = self._object_relpath("clip", clip_id)
                _atomic_write(self.root / relpath, clip.data)
                entry = {
                    "path": relpath,
                    "checksum": hashlib.sha256(clip.data).hexdigest(),
                    "container": clip.container,
                    "size_bytes": len(clip.data),
                    "manifest": json.loads(clip.manifest.canonical_json()),
                    "created_at": time.time(),
                    "last_used": time.time(),
                    "cache_keys": [],
                }
                entries[clip_id] = entry
            if key not in entry["cache_keys"]:
                entry["cache_keys"].append(key)
            entry["last_used"] = time.time()
            self._evict_clips_locked(keep=clip_id)
            self._save_index("clip")
            return self._clip_from_entry(clip_id, entry)

    def _check_manifest(self, clip: ClipBlob):
        if clip.duration_ms != clip.manifest.duration_ms:
            raise ManifestMismatch(
                f"clip duration {clip.duration_ms} ms disagrees with manifest "
                f"{clip.manifest.duration_ms} ms"
            )
        if clip.container == "wav":
            # audio-only clips are fully checkable: bytes are the driving WAV
            if hashlib.sha256(clip.data).hexdigest() != clip.manifest.audio_sha256:
                raise ManifestMismatch("clip bytes do not hash to manifest.audio_sha256")
            blob = audio_codec.AudioBlob(data=clip.data)
            if blob.duration_ms != clip.manifest.duration_ms:
                raise ManifestMismatch(
                    f"decoded duration {blob.duration_ms} ms disagrees with manifest"
                )

    def _clip_from_entry(self, clip_id: str, entry: dict) -> ClipRecord:
        manifest = entry["manifest"]
        return ClipRecord(
            clip_id=clip_id,
            manifest=ClipManifest(
                base_video_id=manifest["base_video_id"],
                audio_sha256=manifest["audio_sha256"],
                duration_ms=manifest["duration_ms"],
            ),
            path=entry["path"],
            container=entry["container"],
            size_bytes=entry["size_bytes"],
            checksum=entry["checksum"],
            created_at=entry["created_at"],
            cache_keys=tuple(entry["cache_keys"]),
        )

    def get_clip(self, clip_id: str) -> tuple[ClipRecord, Path]:
        entry = self._entries("clip").get(clip_id)
        if entry is None:
            raise UnknownAsset(f"no clip with id {clip_id!r}")
        self._verified_bytes("clip", clip_id, entry)
        with self._locks["clip"]:
            entry["last_used"] = time.time()
        return self._clip_from_entry(clip_id, entry), self.root / entry["path"]

    def lookup_cache(self, cache_key: CacheKey) -> str | None:
        """Exact-match clip lookup; returns the cached clip id, if any."""
        key = cache_key.as_string()
        with self._locks["clip"]:
            for clip_id, entry in self._entries("clip").items():
                if key in entry["cache_keys"]:
                    entry["last_used"] = time.time()
                    return clip_id
        return None

    def clear_clip_cache(self):
        with self._locks["clip"]:
            for clip_id, entry in list(self._entries("clip").items()):
                path = self.root / entry["path"]
                if path.exists():
                    path.unlink()
                del self._entries("clip")[clip_id]
            self._save_index("clip")

    def _evict_clips_locked(self, keep: str):
        entries = self._entries("clip")
        total = sum(e["size_bytes"] for e in entries.values())
        if total <= self.clip_budget_bytes:
            return
        by_age = sorted(
            (cid for cid in entries if cid != keep),
            key=lambda cid: entries[cid]["last_used"],
        )
        for cid in by_age:
            if total <= self.clip_budget_bytes:
                break
            entry = entries.pop(cid)
            total -= entry["size_bytes"]
            path = self.root / entry["path"]
            if path.exists():
                path.unlink()
            logger.info("evicted clip %s (%d bytes) from cache", cid, entry["size_bytes"])

    # -- audit ---------------------------------------------------------------------

    def fsck(self) -> FsckReport:
        """Verify every index row's file exists and matches its checksum,
        and flag on-disk objects the indexes do not know about."""
        problems: list[FsckProblem] = []
        checked = 0
        indexed_paths = set()
        for kind in KINDS:
            with self._locks[kind]:
                for asset_id, entry in self._entries(kind).items():
                    checked += 1
                    indexed_paths.add(str(Path(entry["path"])))
                    path = self.root / entry["path"]
                    if not path.exists():
                        problems.append(FsckProblem(kind, asset_id, "missing_file"))
                        continue
                    if _sha256_file(path) != entry["checksum"]:
                        problems.append(FsckProblem(kind, asset_id, "checksum_mismatch"))
        for kind in KINDS:
            kind_dir = self.root / kind
            if not kind_dir.exists():
                continue
            for path in kind_dir.rglob("*"):
                if path.is_dir() or path.name == "index.json" or path.suffix == ".tmp":
                    continue
                rel = str(path.relative_to(self.root))
                if rel not in indexed_paths:
                    problems.append(FsckProblem(kind, path.name, "orphan_file"))
        return FsckReport(checked=checked, problems=tuple(problems))
