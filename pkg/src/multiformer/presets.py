"""Network size presets.

``MultiFormer``, ``MultiFormer-24`` and ``MultiFormer-18`` reproduce the published
encoder widths and heatmap-decoder stacks; ``desk`` is a small configuration
that trains in minutes on a CPU.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

from .numerics.tensor import ConfigurationError

# sentinel for "19 (PCM) or 38 (PAF)" in decoder stacks
HEAD_OUT = -1

ConvSpec = tuple[int, int, int, int]  # (out_channels, kernel, stride, padding)


@dataclass(frozen=True)
class ModelConfig:
    name: str
    packets_raw: int = 10  # T
    n_tx: int = 1
    n_rx: int = 3
    subcarriers_raw: int = 30
    packets: int = 64  # M after upsampling
    subcarriers: int = 64  # N_S after upsampling
    d_model: int = 1296
    heads: int = 4
    layers: int = 8
    d_ff: int | None = None
    dropout: float = 0.1
    channels: int = 256  # C of the fused feature map
    decoder: tuple[ConvSpec, ...] = ((128, 3, 1, 1), (128, 3, 1, 1), (512, 1, 1, 0), (HEAD_OUT, 1, 1, 0))
    stages: int = 3
    papm_ratio: int = 16
    spatial_kernel: int = 7
    embed_std: float = 0.02

    def __post_init__(self):
        side = math.isqrt(self.d_model)
        if side * side != self.d_model:
            raise ConfigurationError(f"d_model={self.d_model} is not a perfect square")
        if self.d_model % self.heads:
            raise ConfigurationError(f"d_model={self.d_model} not divisible by heads={self.heads}")
        if self.layers < 1 or self.stages < 1:
            raise ConfigurationError("layers and stages must be >= 1")
        if self.channels % 2:
            raise ConfigurationError(f"fused channel count {self.channels} must be even")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError(f"dropout rate {self.dropout} outside [0, 1)")
        if not self.decoder or self.decoder[-1][0] != HEAD_OUT:
            raise ConfigurationError("decoder stack must end with the heatmap output layer")

    @property
    def side(self) -> int:
        return math.isqrt(self.d_model)

    @property
    def d_k(self) -> int:
        return self.d_model // self.heads

    @property
    def ffn_width(self) -> int:
        return self.d_ff or self.d_model

    @property
    def links(self) -> int:
        return self.n_tx * self.n_rx

    @property
    def branch_channels(self) -> int:
        return self.channels // 2

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["decoder"] = [list(s) for s in self.decoder]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        d["decoder"] = tuple(tuple(s) for s in d["decoder"])
        return cls(**d)


PRESETS: dict[str, ModelConfig] = {
    "MultiFormer": ModelConfig("MultiFormer"),
    "MultiFormer-24": ModelConfig(
        "MultiFormer-24",
        d_model=576,
        layers=8,
        decoder=((64, 3, 1, 1), (64, 3, 1, 1), (256, 1, 1, 0), (HEAD_OUT, 1, 1, 0)),
    ),
    "MultiFormer-18": ModelConfig(
        "MultiFormer-18",
        d_model=324,
        layers=6,
        decoder=((64, 3, 1, 1), (32, 1, 1, 0), (HEAD_OUT, 1, 1, 0)),
    ),
    "desk": ModelConfig(
        "desk",
        packets=16,
        subcarriers=32,
        d_model=144,
        heads=4,
        layers=2,
        channels=32,
        decoder=((32, 3, 1, 1), (32, 3, 1, 1), (64, 1, 1, 0), (HEAD_OUT, 1, 1, 0)),
    ),
}

# value reported for the full-size model, for comparison in parameter reports
REFERENCE_PARAMS_M = 11.93


def get_preset(name: str, **overrides) -> ModelConfig:
    try:
        cfg = PRESETS[name]
    except KeyError:
        raise ConfigurationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return cfg.replace(**overrides) if overrides else cfg
