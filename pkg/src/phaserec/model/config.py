"""Architecture configuration.

The backbone stage table is data, not code: the default table below is the
mobile-CPU ("lite") variant of the EfficientNet-B0 stack — no
squeeze-excite, ReLU6 activations, stem and feature head fixed under
width/depth scaling. Input 224 ends at a 7×7×320 map, lifted to 1280
features by the head conv and global average pooling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict

from ..errors import ConfigError

# (block, expand_ratio, kernel, stride, out_channels, repeats)
LITE_B0_STAGES = (
    ("mbconv", 1, 3, 1, 16, 1),
    ("mbconv", 6, 3, 2, 24, 2),
    ("mbconv", 6, 5, 2, 40, 2),
    ("mbconv", 6, 3, 2, 80, 3),
    ("mbconv", 6, 5, 1, 112, 3),
    ("mbconv", 6, 5, 2, 192, 4),
    ("mbconv", 6, 3, 1, 320, 1),
)


@dataclass(frozen=True)
class StageSpec:
    block: str          # "mbconv" or "plain-conv"
    expand_ratio: int
    kernel: int
    stride: int
    out_channels: int
    repeats: int


def round_channels(channels: float, divisor: int = 8) -> int:
    """Round width-scaled channels to the nearest multiple of divisor,
    never dropping by more than 10%."""
    rounded = max(divisor, int(channels + divisor / 2) // divisor * divisor)
    if rounded < 0.9 * channels:
        rounded += divisor
    return rounded


@dataclass(frozen=True)
class BackboneConfig:
    stages: tuple[StageSpec, ...] = tuple(StageSpec(*s) for s in LITE_B0_STAGES)
    input_size: int = 224
    resize_size: int = 256      # pre-crop nearest-neighbor target
    stem_channels: int = 32     # fixed under scaling
    feature_dim: int = 1280     # fixed under scaling
    width_mult: float = 1.0
    depth_mult: float = 1.0
    bn_eps: float = 1e-3
    bn_momentum: float = 0.1

    def __post_init__(self):
        if self.input_size < 8:
            raise ConfigError(f"input_size {self.input_size} too small")
        for s in self.stages:
            if s.block not in ("mbconv", "plain-conv"):
                raise ConfigError(f"unknown block type {s.block!r}")
            if s.stride not in (1, 2):
                raise ConfigError(f"illegal stride {s.stride}")

    @property
    def downsample_factor(self) -> int:
        f = 2  # stem stride
        for s in self.stages:
            f *= s.stride
        return f

    def scaled_channels(self, channels: int) -> int:
        if self.width_mult == 1.0:
            return channels
        return round_channels(channels * self.width_mult)

    def scaled_repeats(self, spec: StageSpec, stage_idx: int) -> int:
        # First and last stage keep their depth under scaling, like stem/head.
        if self.depth_mult == 1.0 or stage_idx in (0, len(self.stages) - 1):
            return spec.repeats
        return int(math.ceil(spec.repeats * self.depth_mult))


@dataclass(frozen=True)
class TemporalConfig:
    hidden_units: int = 128
    dropout_prob: float = 0.2
    num_classes: int = 7
    t: int = 10
    head_hidden: int | None = None  # extra dense before the classifier when set

    def __post_init__(self):
        if self.hidden_units <= 0:
            raise ConfigError(f"hidden_units must be positive, got {self.hidden_units}")
        if not 0.0 <= self.dropout_prob < 1.0:
            raise ConfigError(f"dropout_prob must be in [0, 1), got {self.dropout_prob}")
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.t < 1:
            raise ConfigError(f"sequence length t must be >= 1, got {self.t}")


@dataclass(frozen=True)
class ModelConfig:
    backbone: BackboneConfig = field(default_factory=BackboneConfig)
    temporal: TemporalConfig = field(default_factory=TemporalConfig)
    norm_mean: tuple[float, float, float] = (0.5, 0.5, 0.5)
    norm_std: tuple[float, float, float] = (0.5, 0.5, 0.5)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["backbone"]["stages"] = [list(vars(s).values()) for s in self.backbone.stages]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        bb = dict(d["backbone"])
        bb["stages"] = tuple(StageSpec(*s) for s in bb["stages"])
        return cls(
            backbone=BackboneConfig(**bb),
            temporal=TemporalConfig(**d["temporal"]),
            norm_mean=tuple(d.get("norm_mean", (0.5, 0.5, 0.5))),
            norm_std=tuple(d.get("norm_std", (0.5, 0.5, 0.5))),
        )


def default_config(num_classes: int = 7, t: int = 10) -> ModelConfig:
    return ModelConfig(temporal=TemporalConfig(num_classes=num_classes, t=t))


def tiny_config(num_classes: int = 5, t: int = 10, hidden_units: int = 32,
                input_size: int = 64) -> ModelConfig:
    """Scaled-down test variant; keeps the 1280-feature interface."""
    resize = max(input_size + 4, int(round(input_size * 256 / 224)))
    return ModelConfig(
        backbone=BackboneConfig(width_mult=0.25, depth_mult=0.35,
                                input_size=input_size, resize_size=resize),
        temporal=TemporalConfig(hidden_units=hidden_units, num_classes=num_classes, t=t),
    )
