"""Run configuration: one flat dataclass plus a `key = value` file parser.

The file format is a closed key set mirroring TrainConfig's fields; an
unknown key is a usage error so typos fail loudly instead of training with
defaults.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


class UsageError(ValueError):
    """Bad flags or config contents; the CLI maps this to exit code 2."""


@dataclass
class TrainConfig:
    pretrain_rounds: int = 5
    batch_size: int = 1024
    lr: float = 0.001
    k_clusters: int = 120
    n_layers: int = 3
    d_v: int = 300
    m_max: int = 50
    n_filters: int = 2
    n_blocks: int = 2
    n_heads: int = 2
    n_experts: int = 2
    dropout_rate: float = 0.0
    patience: int = 10
    finetune_epochs: int = 100
    seed: int = 0
    sigma: float = 1.0
    use_orthogonal_loss: bool = True
    use_finetune_orthogonal_loss: bool = True
    freeze_cluster_adapter: bool = True
    cluster_filter_residual: bool = False
    cluster_iters: int = 50
    cluster_shift_tol: float = 0.0
    epsilon: float = 1e-8

    def validate(self) -> "TrainConfig":
        positive = ["pretrain_rounds", "batch_size", "k_clusters", "n_layers",
                    "d_v", "m_max", "n_blocks", "n_heads", "n_experts",
                    "finetune_epochs", "cluster_iters"]
        for name in positive:
            if getattr(self, name) < 1:
                raise UsageError(f"{name} must be positive, got {getattr(self, name)}")
        if self.patience < 1:
            raise UsageError(f"patience must be at least 1, got {self.patience}")
        if self.n_filters < 0:
            raise UsageError(f"n_filters must not be negative, got {self.n_filters}")
        if self.lr < 0 or self.sigma < 0 or self.dropout_rate < 0:
            raise UsageError("lr, sigma and dropout_rate must not be negative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise UsageError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.d_v % self.n_heads != 0:
            raise UsageError(f"d_v {self.d_v} not divisible by n_heads {self.n_heads}")
        return self


CONFIG_KEYS = {f.name: f.type for f in dataclasses.fields(TrainConfig)}

_TRUE = {"true", "yes", "on", "1"}
_FALSE = {"false", "no", "off", "0"}


def _parse_value(key: str, raw: str):
    kind = CONFIG_KEYS[key]
    raw = raw.strip()
    try:
        if kind == "bool" or kind is bool:
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if kind == "int" or kind is int:
            return int(raw)
        return float(raw)
    except ValueError:
        raise UsageError(f"config key {key!r}: cannot parse value {raw!r}") from None


def parse_config_text(text: str) -> dict:
    """Flat `key = value` lines; '#' starts a comment; blank lines ignored."""
    values = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise UsageError(f"config line {lineno}: expected 'key = value', "
                             f"got {stripped!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in CONFIG_KEYS:
            raise UsageError(f"config line {lineno}: unknown key {key!r}")
        if key in values:
            raise UsageError(f"config line {lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def load_config(path=None, overrides: dict | None = None) -> TrainConfig:
    values = {}
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            values.update(parse_config_text(fh.read()))
    for key, raw in (overrides or {}).items():
        if key not in CONFIG_KEYS:
            raise UsageError(f"unknown config key {key!r}")
        values[key] = _parse_value(key, str(raw))
    return TrainConfig(**values).validate()
