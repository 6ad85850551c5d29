"""Multi-stage heatmap refinement.

Stage 1 decodes the fused feature map directly. Every later stage derives a
channel weight vector and a spatial weight grid from the previous stage's
heatmaps, rescales the feature map with their outer product, and decodes
again with its own convolution stacks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import nn
from .numerics.tensor import (
    ConfigurationError,
    DimensionError,
    Tensor,
    as_tensor,
    concat,
    relu,
    sigmoid,
)
from .presets import HEAD_OUT, ModelConfig

N_PCM = 19
N_PAF = 38
N_HEATMAP = N_PCM + N_PAF


@dataclass
class StageOutput:
    pcm: Tensor  # (N, 19, S, S)
    paf: Tensor  # (N, 38, S, S)
    phi: Tensor  # feature map the stage decoded
    wc: Tensor | None = None
    ws: Tensor | None = None


class PoseAttention(nn.Module):
    """Channel and spatial weights computed from one stage's 57 heatmap channels."""

    def __init__(self, channels: int, rng: np.random.Generator, ratio: int = 16, kernel: int = 7):
        hidden = max(1, N_HEATMAP // ratio)
        self.mlp1 = nn.Linear(N_HEATMAP, hidden, rng, std=np.sqrt(2.0 / N_HEATMAP))
        self.mlp2 = nn.Linear(hidden, channels, rng, std=np.sqrt(1.0 / hidden))
        self.conv = nn.Conv2d(2, 1, kernel, rng, padding=kernel // 2, gain=1.0)
        self.channels = channels

    def channel(self, pcm, paf) -> Tensor:
        """(N, C) weights in (0, 1)."""
        h = _heatmaps(pcm, paf)
        mx = h.max(axis=(-2, -1))
        av = h.mean(axis=(-2, -1))
        return sigmoid(self._mlp(mx) + self._mlp(av))

    def spatial(self, pcm, paf) -> Tensor:
        """(N, S, S) weights in (0, 1)."""
        h = _heatmaps(pcm, paf)
        pooled = concat([h.max(axis=1, keepdims=True), h.mean(axis=1, keepdims=True)], axis=1)
        s = self.conv(pooled)
        return sigmoid(s.reshape(s.shape[0], *s.shape[2:]))

    def _mlp(self, v: Tensor) -> Tensor:
        return self.mlp2(relu(self.mlp1(v)))

    def forward(self, pcm, paf) -> tuple[Tensor, Tensor]:
        return self.channel(pcm, paf), self.spatial(pcm, paf)


def _heatmaps(pcm, paf) -> Tensor:
    pcm, paf = as_tensor(pcm), as_tensor(paf)
    if pcm.ndim == 3:
        pcm, paf = pcm.reshape(1, *pcm.shape), paf.reshape(1, *paf.shape)
    if pcm.shape[1] != N_PCM or paf.shape[1] != N_PAF or pcm.shape[2:] != paf.shape[2:]:
        raise DimensionError(f"expected 19 PCM and 38 PAF channels on one grid, got {pcm.shape} and {paf.shape}")
    return concat([pcm, paf], axis=1)


def feature_update(phi, wc, ws) -> Tensor:
    """phi[..., c, u, v] * wc[..., c] * ws[..., u, v]; works batched or unbatched."""
    phi, wc, ws = as_tensor(phi), as_tensor(wc, dtype=None), as_tensor(ws)
    if phi.shape[-3] != wc.shape[-1] or phi.shape[-2:] != ws.shape[-2:]:
        raise DimensionError(f"feature map {phi.shape} does not match weights {wc.shape}, {ws.shape}")
    wc4 = wc.reshape(*wc.shape, 1, 1)
    ws4 = ws.reshape(*ws.shape[:-2], 1, *ws.shape[-2:])
    return phi * wc4 * ws4


class ConvStack(nn.Module):
    def __init__(self, c_in: int, specs, out_channels: int, rng: np.random.Generator):
        self.convs = []
        for c_out, k, stride, pad in specs:
            if stride != 1 or 2 * pad != k - 1:
                raise ConfigurationError(f"decoder layer k={k} s={stride} p={pad} does not preserve the grid size")
            c_out = out_channels if c_out == HEAD_OUT else c_out
            self.convs.append(nn.Conv2d(c_in, c_out, k, rng, stride=stride, padding=pad))
            c_in = c_out

    def forward(self, x) -> Tensor:
        for i, conv in enumerate(self.convs):
            x = conv(x)
            if i < len(self.convs) - 1:
                x = relu(x)
        return x


class HeatmapDecoder(nn.Module):
    """Two parallel conv stacks: PCM (19 channels) and PAF (38 channels)."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.pcm_head = ConvStack(cfg.channels, cfg.decoder, N_PCM, rng)
        self.paf_head = ConvStack(cfg.channels, cfg.decoder, N_PAF, rng)

    def forward(self, phi) -> tuple[Tensor, Tensor]:
        return self.pcm_head(phi), self.paf_head(phi)


class MultiStageFusion(nn.Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.decoders = [HeatmapDecoder(cfg, rng) for _ in range(cfg.stages)]
        self.attention = [PoseAttention(cfg.channels, rng, cfg.papm_ratio, cfg.spatial_kernel) for _ in range(cfg.stages - 1)]

    def forward(self, phi0, n_stages: int | None = None, unit_attention: bool = False) -> list[StageOutput]:
        return run_stages(self, phi0, n_stages, unit_attention)


def run_stages(net: MultiStageFusion, phi0, n_stages: int | None = None, unit_attention: bool = False) -> list[StageOutput]:
    """Decode ``n_stages`` heatmap sets; stage 1 uses all-ones attention weights.

    With ``unit_attention`` every stage uses all-ones weights, so each stage
    sees exactly the fused feature map.
    """
    n_stages = net.cfg.stages if n_stages is None else n_stages
    if not 1 <= n_stages <= len(net.decoders):
        raise ConfigurationError(f"n_stages={n_stages} outside [1, {len(net.decoders)}]")
    phi0 = as_tensor(phi0)
    batch = phi0.shape[0]
    side = phi0.shape[-2:]
    ones_c = Tensor(np.ones((batch, phi0.shape[1]), dtype=phi0.dtype))
    ones_s = Tensor(np.ones((batch, *side), dtype=phi0.dtype))
    outputs: list[StageOutput] = []
    phi = feature_update(phi0, ones_c, ones_s)
    wc, ws = ones_c, ones_s
    for i in range(n_stages):
        if i > 0:
            if unit_attention:
                wc, ws = ones_c, ones_s
            else:
                prev = outputs[-1]
                wc, ws = net.attention[i - 1](prev.pcm, prev.paf)
            phi = feature_update(phi, wc, ws)
        pcm, paf = net.decoders[i](phi)
        outputs.append(StageOutput(pcm, paf, phi, wc, ws))
    return outputs


__all__ = [
    "HeatmapDecoder",
    "MultiStageFusion",
    "N_HEATMAP",
    "N_PAF",
    "N_PCM",
    "PoseAttention",
    "StageOutput",
    "feature_update",
    "run_stages",
]
