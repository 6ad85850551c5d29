from __future__ import annotations

import numpy as np

from ..numerics import nn
from ..numerics.tensor import DimensionError, Tensor, as_tensor


class TokenEmbedding(nn.Module):
    """Project raw tokens to d_model, add a learned per-position embedding, batch-normalize.

    Batch statistics are kept per token (one channel per subcarrier or per
    packet) and pooled over the batch and feature axes.
    """

    def __init__(self, n_tokens: int, raw_width: int, d_model: int, rng: np.random.Generator, embed_std: float = 0.02):
        self.n_tokens = n_tokens
        self.raw_width = raw_width
        self.d_model = d_model
        self.proj = nn.Linear(raw_width, d_model, rng)
        self.embedding = nn.parameter(rng.normal(0.0, embed_std, (n_tokens, d_model)))
        self.norm = nn.BatchNorm(n_tokens, reduce_axes=(0, 2))

    def embed(self, tokens) -> Tensor:
        tokens = as_tensor(tokens, dtype=self.embedding.dtype)
        if tokens.shape[-2:] != (self.n_tokens, self.raw_width):
            raise DimensionError(
                f"raw tokens {tokens.shape} do not match projection ({self.n_tokens} tokens x {self.raw_width})"
            )
        return self.proj(tokens) + self.embedding

    def forward(self, tokens) -> Tensor:
        """(N, n_tokens, raw_width) -> (N, n_tokens, d_model)."""
        return self.norm(self.embed(tokens))
