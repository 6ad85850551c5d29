"""The full network: token embedding and encoder branches, fusion, multi-stage heatmap heads."""

from __future__ import annotations

import numpy as np

from .encoder import DualBranchEncoder
from .frontend.csi import CsiWindow, tokenize_window
from .msfn import MultiStageFusion, StageOutput
from .numerics import nn
from .numerics.tensor import Tensor, no_grad
from .presets import ModelConfig


class MultiFormer(nn.Module):
    def __init__(self, cfg: ModelConfig, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.cfg = cfg
        self.encoder = DualBranchEncoder(cfg, rng)
        self.msfn = MultiStageFusion(cfg, rng)

    def features(self, freq_tokens, temp_tokens) -> Tensor:
        return self.encoder(freq_tokens, temp_tokens)

    def forward(self, freq_tokens, temp_tokens, n_stages: int | None = None, unit_attention: bool = False) -> list[StageOutput]:
        """Token batches (N, N_S, M*links) and (N, M, N_S*links) -> one StageOutput per stage."""
        return self.msfn(self.features(freq_tokens, temp_tokens), n_stages, unit_attention)

    def tokenize(self, window: CsiWindow) -> tuple[np.ndarray, np.ndarray]:
        return tokenize_window(window, self.cfg.packets, self.cfg.subcarriers)

    def predict(self, freq_tokens, temp_tokens) -> tuple[np.ndarray, np.ndarray]:
        """Final-stage (pcm, paf) arrays in eval mode without recording a tape."""
        was_training = self.training
        self.eval()
        try:
            with no_grad():
                last = self(freq_tokens, temp_tokens)[-1]
        finally:
            self.train(was_training)
        return last.pcm.data, last.paf.data


def parameter_breakdown(model: MultiFormer) -> dict[str, int]:
    """Parameter counts grouped by top-level component."""
    groups = {
        "embedding": 0,
        "attention": 0,
        "ffn_and_norm": 0,
        "reconstruction_and_fusion": 0,
        "pose_attention": 0,
        "heatmap_decoders": 0,
    }
    for name, p in model.named_parameters():
        if ".embed." in name:
            key = "embedding"
        elif ".attn." in name:
            key = "attention"
        elif ".blocks." in name:
            key = "ffn_and_norm"
        elif name.startswith("encoder."):
            key = "reconstruction_and_fusion"
        elif name.startswith("msfn.attention"):
            key = "pose_attention"
        else:
            key = "heatmap_decoders"
        groups[key] += p.size
    groups["total"] = sum(groups.values())
    return groups
