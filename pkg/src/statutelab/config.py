"""Run configuration: JSON file plus command-line overrides.

Unknown keys are rejected by name before any work starts.  The "paper" and
"desk" presets pick the encoder sizes; explicit keys win over the preset.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, asdict

from .encoders import PRESETS

__all__ = ["RunConfig", "load_config", "merge_overrides", "effective_sizes"]


@dataclass
class RunConfig:
    seed: int | None = None
    preset: str = "desk"
    model: str = "attentive_cnn"  # or paraformer_lite
    # lexical
    k1: float = 1.2
    b: float = 0.75
    n_train: int = 50
    n_predict: int = 150
    # ensembling
    alpha: float | str = "grid"
    step: float = 0.01
    eval_k: int = 1
    # training
    K: int = 2
    lr: float = 0.05
    epochs: int = 10
    # injection
    positions: list[int] = field(default_factory=lambda: [2, 3, 4])
    portions: list[float] | None = None
    # encoder sizes; None means take the preset value
    embed_dim: int | None = None
    filters: int | None = None
    attn_dim: int | None = None
    dropout: float | None = None
    width: int = 3
    n_layers: int = 2
    n_heads: int = 2
    neg_ratio: float = 1.0

    def validate(self) -> None:
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}")
        if self.model not in ("attentive_cnn", "paraformer_lite"):
            raise ValueError(f"unknown model {self.model!r}")
        if isinstance(self.alpha, str):
            if self.alpha != "grid":
                raise ValueError(f'alpha must be a number in [0, 1] or "grid", got {self.alpha!r}')
        elif not 0.0 <= float(self.alpha) <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 < self.step <= 1.0:
            raise ValueError(f"step must be in (0, 1], got {self.step}")
        for key in ("n_train", "n_predict", "epochs", "eval_k", "n_layers", "n_heads", "width"):
            if getattr(self, key) < 1:
                raise ValueError(f"{key} must be >= 1")
        if self.K < 0:
            raise ValueError("K must be >= 0")


_FIELDS = {f.name for f in fields(RunConfig)}


def load_config(path) -> RunConfig:
    """Read a JSON config; unknown keys are an error naming the key."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    if not isinstance(obj, dict):
        raise ValueError("config must be a JSON object")
    for key in obj:
        if key not in _FIELDS:
            raise ValueError(f"unknown config key {key!r}")
    cfg = RunConfig(**obj)
    cfg.validate()
    return cfg


def merge_overrides(cfg: RunConfig, overrides: dict) -> RunConfig:
    """Apply non-None command-line overrides on top of the file config."""
    data = asdict(cfg)
    for key, value in overrides.items():
        if value is None:
            continue
        if key not in _FIELDS:
            raise ValueError(f"unknown config key {key!r}")
        data[key] = value
    merged = RunConfig(**data)
    merged.validate()
    return merged


def effective_sizes(cfg: RunConfig) -> dict:
    """Encoder sizes with the preset filled in where keys were left unset."""
    preset = PRESETS[cfg.preset]
    return {
        "embed_dim": cfg.embed_dim if cfg.embed_dim is not None else preset["embed_dim"],
        "filters": cfg.filters if cfg.filters is not None else preset["filters"],
        "attn_dim": cfg.attn_dim if cfg.attn_dim is not None else preset["attn_dim"],
        "dropout": cfg.dropout if cfg.dropout is not None else preset["dropout"],
    }
