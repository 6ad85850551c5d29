"""Dual-branch self-attention feature extractor.

Each branch embeds its token sequence, runs ``layers`` encoder blocks and
reshapes every token into an S x S plane for a 3x3 convolution. The two
branch maps are concatenated and mixed by a 1x1 convolution into the fused
feature map.
"""

from __future__ import annotations

import math

import numpy as np

from .frontend.embedding import TokenEmbedding
from .numerics import nn
from .numerics.tensor import (
    ConfigurationError,
    DimensionError,
    Tensor,
    as_tensor,
    concat,
    no_grad,
    relu,
    softmax,
)
from .presets import ModelConfig


class MultiHeadSelfAttention(nn.Module):
    """Head-averaged self-attention.

    Query/key projections are d_model -> d_k per head; value projections keep
    the full d_model width so the H head outputs can be averaged directly.
    """

    def __init__(self, d_model: int, heads: int, rng: np.random.Generator, qk_std: float = 0.02):
        if d_model % heads:
            raise ConfigurationError(f"d_model={d_model} is not divisible by heads={heads}")
        self.d_model = d_model
        self.heads = heads
        self.d_k = d_model // heads
        self.w_q = nn.parameter(rng.normal(0.0, qk_std, (heads, d_model, self.d_k)))
        self.w_k = nn.parameter(rng.normal(0.0, qk_std, (heads, d_model, self.d_k)))
        self.w_v = nn.parameter(rng.normal(0.0, 1.0 / math.sqrt(d_model), (heads, d_model, d_model)))
        self.record = False
        self.last_attention: np.ndarray | None = None

    def attention(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """Return (probabilities (N,H,n,n), values (N,H,n,d_model))."""
        n_batch, n_tok, d = x.shape
        xb = x.reshape(n_batch, 1, n_tok, d)
        q = xb @ self.w_q
        k = xb @ self.w_k
        v = xb @ self.w_v
        logits = (q @ k.swapaxes(-1, -2)) * (1.0 / math.sqrt(self.d_k))
        return softmax(logits, axis=-1), v

    def forward(self, x) -> Tensor:
        x = as_tensor(x, dtype=self.w_q.dtype)
        single = x.ndim == 2
        if single:
            x = x.reshape(1, *x.shape)
        if x.shape[-1] != self.d_model:
            raise DimensionError(f"msa input width {x.shape[-1]} != d_model {self.d_model}")
        probs, v = self.attention(x)
        if self.record:
            self.last_attention = probs.data.copy()
        out = (probs @ v).mean(axis=1)
        return out.reshape(*out.shape[1:]) if single else out


def msa(x, w_q, w_k, w_v) -> Tensor:
    """Functional head-averaged attention with explicit (H, d, d_k)/(H, d, d) weights."""
    layer = MultiHeadSelfAttention.__new__(MultiHeadSelfAttention)
    layer.w_q, layer.w_k, layer.w_v = (as_tensor(w) for w in (w_q, w_k, w_v))
    layer.heads, layer.d_model, layer.d_k = layer.w_q.shape
    layer.record = False
    if layer.d_model % layer.heads or layer.d_model // layer.heads != layer.d_k:
        raise ConfigurationError(f"query width {layer.d_k} != d_model/heads for weights {layer.w_q.shape}")
    return layer.forward(x)


class EncoderBlock(nn.Module):
    """attention -> FFN(linear, ReLU, dropout, linear) -> residual around the FFN -> layer norm."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.attn = MultiHeadSelfAttention(cfg.d_model, cfg.heads, rng)
        self.ff1 = nn.Linear(cfg.d_model, cfg.ffn_width, rng, std=math.sqrt(2.0 / cfg.d_model))
        self.drop = nn.Dropout(cfg.dropout)
        self.ff2 = nn.Linear(cfg.ffn_width, cfg.d_model, rng, std=math.sqrt(1.0 / cfg.ffn_width))
        self.norm = nn.LayerNorm(cfg.d_model)

    def forward(self, x) -> Tensor:
        a = self.attn(x)
        h = self.ff2(self.drop(relu(self.ff1(a))))
        return self.norm(a + h)


class Reconstruction(nn.Module):
    """(N, n, S*S) token features -> (N, C_b, S, S) map: reshape, 3x3 conv, BN, ReLU."""

    def __init__(self, n_tokens: int, side: int, out_channels: int, rng: np.random.Generator):
        self.side = side
        # no bias: the following batch norm would cancel it
        self.conv = nn.Conv2d(n_tokens, out_channels, 3, rng, padding=1, bias=False)
        self.norm = nn.BatchNorm(out_channels, reduce_axes=(0, 2, 3))

    def forward(self, feats) -> Tensor:
        feats = as_tensor(feats)
        if feats.shape[-1] != self.side * self.side:
            raise ConfigurationError(f"token width {feats.shape[-1]} is not {self.side}^2")
        planes = feats.reshape(*feats.shape[:-1], self.side, self.side)
        return relu(self.norm(self.conv(planes)))


class Branch(nn.Module):
    def __init__(self, n_tokens: int, raw_width: int, cfg: ModelConfig, rng: np.random.Generator):
        self.embed = TokenEmbedding(n_tokens, raw_width, cfg.d_model, rng, cfg.embed_std)
        self.blocks = [EncoderBlock(cfg, rng) for _ in range(cfg.layers)]
        self.reconstruct = Reconstruction(n_tokens, cfg.side, cfg.branch_channels, rng)

    def encode(self, tokens) -> Tensor:
        x = self.embed(tokens)
        for block in self.blocks:
            x = block(x)
        return x

    def forward(self, tokens) -> Tensor:
        return self.reconstruct(self.encode(tokens))


class Fusion(nn.Module):
    """Channel-concatenate both branch maps, then 1x1 conv -> BN -> ReLU."""

    def __init__(self, branch_channels: int, channels: int, rng: np.random.Generator):
        self.conv = nn.Conv2d(2 * branch_channels, channels, 1, rng, bias=False)
        self.norm = nn.BatchNorm(channels, reduce_axes=(0, 2, 3))

    def forward(self, freq_map, temp_map) -> Tensor:
        if freq_map.shape[-2:] != temp_map.shape[-2:]:
            raise DimensionError(f"branch maps differ spatially: {freq_map.shape} vs {temp_map.shape}")
        return relu(self.norm(self.conv(concat([freq_map, temp_map], axis=1))))


class DualBranchEncoder(nn.Module):
    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.cfg = cfg
        self.freq = Branch(cfg.subcarriers, cfg.packets * cfg.links, cfg, rng)
        self.temp = Branch(cfg.packets, cfg.subcarriers * cfg.links, cfg, rng)
        self.fuse = Fusion(cfg.branch_channels, cfg.channels, rng)

    def forward(self, freq_tokens, temp_tokens) -> Tensor:
        """Raw token batches -> fused feature map (N, C, S, S)."""
        return self.fuse(self.freq(freq_tokens), self.temp(temp_tokens))

    def branch(self, name: str) -> Branch:
        if name in ("freq", "frequency"):
            return self.freq
        if name in ("time", "temp", "temporal"):
            return self.temp
        raise ConfigurationError(f"unknown branch {name!r}")


def export_attention(branch: Branch, tokens, layer: int, head: int) -> tuple[np.ndarray, np.ndarray]:
    """Attention matrix (n x n) of one head for a single token matrix, plus per-key salience.

    Salience is the attention each key token receives, averaged over queries.
    """
    if not 0 <= layer < len(branch.blocks):
        raise IndexError(f"layer {layer} out of range [0, {len(branch.blocks)})")
    heads = branch.blocks[layer].attn.heads
    if not 0 <= head < heads:
        raise IndexError(f"head {head} out of range [0, {heads})")
    tokens = np.asarray(tokens)
    if tokens.ndim == 2:
        tokens = tokens[None]
    was_training = branch.training
    target = branch.blocks[layer].attn
    branch.eval()
    target.record = True
    try:
        with no_grad():
            branch.encode(tokens)
        probs = target.last_attention[0, head]
    finally:
        target.record = False
        target.last_attention = None
        branch.train(was_training)
    return probs, probs.mean(axis=0)


__all__ = [
    "Branch",
    "DualBranchEncoder",
    "EncoderBlock",
    "Fusion",
    "MultiHeadSelfAttention",
    "Reconstruction",
    "export_attention",
    "msa",
]
