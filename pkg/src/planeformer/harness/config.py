"""Training configuration and its plain-text ``key = value`` file format."""

from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, fields

from ..losses import LossConfig
from ..model import ModelConfig


@dataclass(frozen=True)
class TrainConfig:
    # optimization
    lr: float = 1e-4
    lr_halving_period: int = 15
    epochs: int = 60
    weight_decay: float = 1e-5
    batch_size: int = 8
    seed: int = 0
    grad_clip: float = 0.0  # 0 disables clipping
    # model (desk-scale defaults)
    num_queries: int = 20
    d_model: int = 64
    embed_dim: int = 8
    heads: int = 4
    enc_layers: int = 6
    dec_layers: int = 6
    ffn_dim: int = 128
    backbone_channels: tuple = (16, 32, 64, 128)
    pixel_width: int = 32
    dropout: float = 0.0
    use_lines: bool = True
    use_center: bool = True
    # loss
    omega: float = 2.0
    beta1: float = 5.0
    beta2: float = 2.0
    delta_pull: float = 0.5
    delta_push: float = 1.5
    lam: float = 5.0
    aux_weight: float = 0.1
    plane_point_cap: int = 512
    reduction: str = "mean"
    # inference
    embed_threshold: float = 1.0
    keep_threshold: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "backbone_channels", tuple(int(c) for c in self.backbone_channels))
        positive = ("lr", "lr_halving_period", "epochs", "batch_size", "num_queries", "d_model", "embed_dim")
        bad = [k for k in positive if not getattr(self, k) > 0]
        if bad or self.weight_decay < 0:
            raise ValueError(f"config values must be positive: {', '.join(bad) or 'weight_decay'}")
        self.model_config()
        self.loss_config()

    def model_config(self) -> ModelConfig:
        names = {f.name for f in fields(ModelConfig)}
        return ModelConfig(**{k: getattr(self, k) for k in names})

    def loss_config(self) -> LossConfig:
        names = {f.name for f in fields(LossConfig)}
        return LossConfig(**{k: getattr(self, k) for k in names})

    def lr_at(self, epoch: int) -> float:
        """Learning rate of 1-based ``epoch``: halved after every ``lr_halving_period`` epochs."""
        return self.lr * 0.5 ** ((epoch - 1) // self.lr_halving_period)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["backbone_channels"] = list(self.backbone_channels)
        return d

    def fingerprint(self) -> str:
        return hashlib.sha256(json.dumps(self.to_dict(), sort_keys=True).encode()).hexdigest()[:16]

    def replace(self, **kw) -> "TrainConfig":
        return dataclasses.replace(self, **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**d)


def _coerce(field_type, key, raw: str):
    raw = raw.strip()
    t = field_type if isinstance(field_type, str) else getattr(field_type, "__name__", str(field_type))
    try:
        if t == "bool":
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if t == "int":
            return int(raw)
        if t == "float":
            return float(raw)
        if t == "tuple":
            return tuple(int(x) for x in raw.replace(",", " ").split())
        return raw
    except ValueError as exc:
        raise ValueError(f"config key '{key}': cannot parse {raw!r} as {t}") from exc


def parse_config_text(text: str, base: TrainConfig | None = None) -> TrainConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    parser.optionxform = str
    parser.read_string("[config]\n" + text)
    types = {f.name: f.type for f in fields(TrainConfig)}
    values = {}
    for key, raw in parser["config"].items():
        if key not in types:
            raise ValueError(f"unknown config key '{key}'")
        values[key] = _coerce(types[key], key, raw)
    return (base or TrainConfig()).replace(**values)


def load_config(path, base: TrainConfig | None = None) -> TrainConfig:
    with open(path) as fh:
        return parse_config_text(fh.read(), base)


def dump_config(cfg: TrainConfig) -> str:
    lines = []
    for k, v in cfg.to_dict().items():
        if isinstance(v, list):
            v = ",".join(str(x) for x in v)
        lines.append(f"{k} = {v}")
    return "\n".join(lines) + "\n"
