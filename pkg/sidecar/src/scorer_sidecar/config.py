"""Service configuration: model identifiers, listen address, batching."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml


@dataclass(frozen=True)
class SidecarConfig:
    embedder: str = "lexical-ngram-256"
    qe: str = "lexical-qe"
    comet: str = "lexical-chrf"
    host: str = "127.0.0.1"
    port: int = 8040
    batch_size: int = 16
    device: str = "cpu"

    @classmethod
    def from_file(cls, path) -> "SidecarConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        if not isinstance(raw, dict):
            raise ValueError(f"{path}: models config must be a mapping")
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(**raw)
