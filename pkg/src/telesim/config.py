"""Deployment configuration: one JSON file holding ports, provider
configs, and filesystem roots. Credentials are referenced by environment
variable name only and are never part of the file."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .assets import DEFAULT_CLIP_BUDGET_BYTES
from .errors import ConfigError
from .providers.base import DialogueParams, ProviderConfig

DEFAULT_HOST = "127.0.0.1"
DEFAULT_PORT = 8077


def _provider_from_dict(kind: str, raw: dict | None) -> ProviderConfig | None:
    if raw is None:
        return None
    delay = raw.get("simulated_delay_ms")
    return ProviderConfig(
        kind=kind,
        mode=raw.get("mode", "offline"),
        endpoint=raw.get("endpoint"),
        credential_env=raw.get("credential_env"),
        timeout_ms=int(raw.get("timeout_ms", 30_000)),
        max_retries=int(raw.get("max_retries", 2)),
        simulated_delay_ms=tuple(delay) if delay else None,
    )


@dataclass
class AppConfig:
    data_root: Path
    personas_dir: Path
    host: str = DEFAULT_HOST
    port: int = DEFAULT_PORT
    instructions_file: Path | None = None
    cors_origins: list[str] = field(default_factory=lambda: ["http://localhost:5173"])
    clip_cache_budget_bytes: int = DEFAULT_CLIP_BUDGET_BYTES
    console_dist: Path | None = None
    providers: dict[str, ProviderConfig | None] = field(default_factory=dict)
    dialogue_params: DialogueParams = field(default_factory=DialogueParams)

    def __post_init__(self):
        for kind in ("dialogue", "synthesizer", "lipsync"):
            self.providers.setdefault(kind, ProviderConfig(kind=kind, mode="offline"))
        self.providers.setdefault("transcriber", ProviderConfig(kind="transcriber", mode="offline"))

    @property
    def store_root(self) -> Path:
        return self.data_root / "store"

    @property
    def sessions_root(self) -> Path:
        return self.data_root / "sessions"


def load_config(path: str | Path) -> AppConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc

    base = path.parent

    def resolve(value: str | None) -> Path | None:
        if value is None:
            return None
        p = Path(value)
        return p if p.is_absolute() else base / p

    providers_raw = raw.get("providers", {})
    providers = {
        kind: _provider_from_dict(kind, providers_raw.get(kind, {}))
        for kind in ("transcriber", "dialogue", "synthesizer", "lipsync")
    }
    # an explicit null disables the capability (text-only deployments)
    for kind, value in providers_raw.items():
        if value is None:
            providers[kind] = None

    dialogue_raw = raw.get("dialogue_params", {})
    return AppConfig(
        data_root=resolve(raw.get("data_root", "data")),
        personas_dir=resolve(raw.get("personas_dir", "personas")),
        host=raw.get("host", DEFAULT_HOST),
        port=int(raw.get("port", DEFAULT_PORT)),
        instructions_file=resolve(raw.get("instructions_file")),
        cors_origins=list(raw.get("cors_origins", ["http://localhost:5173"])),
        clip_cache_budget_bytes=int(raw.get("clip_cache_budget_bytes", DEFAULT_CLIP_BUDGET_BYTES)),
        console_dist=resolve(raw.get("console_dist")),
        providers=providers,
        dialogue_params=DialogueParams(
            temperature=float(dialogue_raw.get("temperature", 0.8)),
            max_reply_tokens=int(dialogue_raw.get("max_reply_tokens", 400)),
            history_window=int(dialogue_raw.get("history_window", 20)),
        ),
    )
