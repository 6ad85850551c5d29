"""PCK evaluation and parameter reports.

A prediction counts as correct for keypoint j when its distance to the ground
truth, divided by the torso length |r_shoulder - l_hip|, is at most alpha/100.
Predicted and ground-truth persons are paired by a minimum mean-distance
assignment; ground-truth persons without a partner count every keypoint as
missed.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .datakit.dataset import ArrayBatch, DatasetError
from .decoder.pose import DecodeParams, SkeletonSet, decode_poses
from .decoder.topology import KEYPOINTS, L_HIP, N_KEYPOINTS, R_SHOULDER
from .model import MultiFormer, parameter_breakdown
from .numerics.tensor import no_grad
from .presets import REFERENCE_PARAMS_M, get_preset

DEFAULT_ALPHAS = (5, 10, 20, 30, 40, 50)
_UNMATCHED = 1e6


def torso_length(gt: np.ndarray) -> float:
    return float(np.linalg.norm(gt[R_SHOULDER] - gt[L_HIP]))


def literal_normalizer(gt: np.ndarray) -> float:
    """sqrt(|r_shoulder|^2 + |l_hip|^2) with both read as position vectors."""
    return float(math.sqrt(gt[R_SHOULDER] @ gt[R_SHOULDER] + gt[L_HIP] @ gt[L_HIP]))


def match_persons(preds: list, gts: list) -> list[int | None]:
    """For every ground-truth person the index of its predicted partner (or None)."""
    if not preds or not gts:
        return [None] * len(gts)
    n = max(len(preds), len(gts))
    cost = np.full((n, n), _UNMATCHED)
    for g, gt in enumerate(gts):
        for p, pd in enumerate(preds):
            d = np.linalg.norm(pd - gt, axis=1)
            d = d[~np.isnan(d)]
            if d.size:
                cost[g, p] = d.mean()
    assign = _kernels.hungarian_min(cost)
    return [int(assign[g]) if assign[g] < len(preds) and cost[g, assign[g]] < _UNMATCHED else None for g in range(len(gts))]


@dataclass
class PckCounts:
    """Per-keypoint hit counts for a set of alphas under one normalizer."""

    alphas: tuple
    hits: dict = field(default_factory=dict)  # alpha -> (18,) int
    total: np.ndarray = field(default_factory=lambda: np.zeros(N_KEYPOINTS, dtype=np.int64))

    def __post_init__(self):
        for a in self.alphas:
            self.hits.setdefault(a, np.zeros(N_KEYPOINTS, dtype=np.int64))

    def add(self, gt: np.ndarray, pd: np.ndarray | None, norm: float) -> None:
        present = ~np.isnan(gt).any(axis=1)
        self.total += present
        if pd is None:
            return
        ratio = np.linalg.norm(pd - gt, axis=1) / norm
        for a in self.alphas:
            # NaN (missing prediction) compares False
            self.hits[a] += present & (ratio <= a / 100.0)

    def per_keypoint(self) -> dict:
        out = {}
        for a in self.alphas:
            out[a] = {
                KEYPOINTS[j]: (float(self.hits[a][j] / self.total[j]) if self.total[j] else None) for j in range(N_KEYPOINTS)
            }
        return out

    def mean(self) -> dict:
        n = int(self.total.sum())
        return {a: (float(self.hits[a].sum() / n) if n else None) for a in self.alphas}


def pck_counts(predictions, annotations, alphas=DEFAULT_ALPHAS, normalizer=torso_length) -> tuple[PckCounts, int]:
    """predictions[i] is a list of (18, 2) normalized arrays; returns (counts, skipped persons)."""
    counts = PckCounts(tuple(alphas))
    skipped = 0
    for preds, ann in zip(predictions, annotations, strict=True):
        gts = ann.persons if hasattr(ann, "persons") else ann
        partner = match_persons(list(preds), list(gts))
        for g, gt in enumerate(gts):
            if np.isnan(gt[R_SHOULDER]).any() or np.isnan(gt[L_HIP]).any():
                skipped += 1
                continue
            norm = normalizer(gt)
            if norm <= 0:
                skipped += 1
                continue
            counts.add(gt, None if partner[g] is None else preds[partner[g]], norm)
    return counts, skipped


@dataclass
class EvalReport:
    alphas: tuple
    pck: dict  # alpha -> {keypoint: value|None}, final stage
    mean: dict  # alpha -> mean over keypoints instances, final stage
    per_stage: list  # one {alpha: mean} per stage
    params: int
    n_samples: int
    n_skipped: int = 0
    literal_normalizer: dict | None = None  # alpha -> mean PCK with the literal normalizer
    wall_clock_s: float = 0.0  # not serialized, keeps reports reproducible

    def to_dict(self) -> dict:
        d = {
            "alpha": {str(a): self.pck[a] for a in self.alphas},
            "mean": {str(a): self.mean[a] for a in self.alphas},
            "per_stage": [{str(a): s[a] for a in self.alphas} for s in self.per_stage],
            "params": self.params,
            "n_samples": self.n_samples,
            "n_skipped": self.n_skipped,
        }
        if self.literal_normalizer is not None:
            d["literal_normalizer_mean"] = {str(a): self.literal_normalizer[a] for a in self.alphas}
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)

    def table(self) -> str:
        head = "keypoint      " + " ".join(f"PCK@{a:<4}" for a in self.alphas)
        lines = [head, "-" * len(head)]
        for name in KEYPOINTS:
            cells = []
            for a in self.alphas:
                v = self.pck[a][name]
                cells.append(f"{'  -   ' if v is None else f'{v:6.3f}'}  ")
            lines.append(f"{name:<13} " + " ".join(cells))
        lines.append("-" * len(head))
        lines.append("mean          " + " ".join(f"{'  -   ' if self.mean[a] is None else f'{self.mean[a]:6.3f}'}  " for a in self.alphas))
        for i, s in enumerate(self.per_stage, 1):
            lines.append(f"stage {i:<7} " + " ".join(f"{'  -   ' if s[a] is None else f'{s[a]:6.3f}'}  " for a in self.alphas))
        lines.append(f"parameters: {self.params}   samples: {self.n_samples}   skipped persons: {self.n_skipped}")
        return "\n".join(lines)


def skeleton_points(skel: SkeletonSet) -> list[np.ndarray]:
    return skel.normalized_keypoints()


def evaluate_skeletons(skeletons, annotations, alphas=DEFAULT_ALPHAS, params: int = 0) -> EvalReport:
    """PCK for already decoded skeletons (one SkeletonSet per annotation)."""
    if not annotations:
        raise DatasetError("cannot evaluate an empty split")
    preds = [skeleton_points(s) for s in skeletons]
    counts, skipped = pck_counts(preds, annotations, alphas)
    literal, _ = pck_counts(preds, annotations, alphas, literal_normalizer)
    mean = counts.mean()
    return EvalReport(tuple(alphas), counts.per_keypoint(), mean, [mean], params, len(annotations), skipped, literal.mean())


def stage_skeletons(model: MultiFormer, data: ArrayBatch, decode: DecodeParams | None = None, batch_size: int = 16) -> list[list[SkeletonSet]]:
    """Decoded skeletons per stage: result[stage][sample]."""
    was_training = model.training
    model.eval()
    per_stage: list[list[SkeletonSet]] = [[] for _ in range(model.cfg.stages)]
    try:
        with no_grad():
            for idx in np.array_split(np.arange(len(data)), max(1, math.ceil(len(data) / batch_size))):
                b = data.take(idx)
                outs = model(b.freq, b.temp)
                for s, out in enumerate(outs):
                    for i in range(len(idx)):
                        per_stage[s].append(decode_poses(out.pcm.data[i], out.paf.data[i], decode))
    finally:
        model.train(was_training)
    return per_stage


def evaluate_pck(model: MultiFormer, data: ArrayBatch, alphas=DEFAULT_ALPHAS, decode: DecodeParams | None = None) -> EvalReport:
    """Decode every stage's heatmaps and score them; headline numbers use the final stage."""
    if len(data) == 0:
        raise DatasetError("cannot evaluate an empty split")
    start = time.perf_counter()
    per_stage = stage_skeletons(model, data, decode)
    stage_means = []
    for skels in per_stage:
        counts, _ = pck_counts([skeleton_points(s) for s in skels], data.anns, alphas)
        stage_means.append(counts.mean())
    report = evaluate_skeletons(per_stage[-1], data.anns, alphas, params=model_parameter_count(model))
    report.per_stage = stage_means
    report.wall_clock_s = time.perf_counter() - start
    return report


def model_parameter_count(model) -> int:
    return int(sum(p.size for p in model.parameters()))


def parameter_report(preset: str = "MultiFormer") -> dict:
    """Parameter breakdown of a preset next to the published 11.93 M figure."""
    cfg = get_preset(preset)
    model = MultiFormer(cfg)
    counts = parameter_breakdown(model)
    total = counts["total"]
    ratio = total / (REFERENCE_PARAMS_M * 1e6)
    report = {
        "preset": preset,
        "params": counts,
        "params_m": total / 1e6,
        "reference_m": REFERENCE_PARAMS_M,
        "ratio": ratio,
        "within_25pct": bool(abs(ratio - 1.0) <= 0.25),
    }
    if not report["within_25pct"]:
        report["justification"] = _justification(cfg, counts)
    return report


def _justification(cfg, counts) -> str:
    d, h, L = cfg.d_model, cfg.heads, cfg.layers
    if counts["total"] < REFERENCE_PARAMS_M * 1e6:
        return (
            f"{cfg.name} is a reduced configuration (d={d}, {L} layers per branch, C={cfg.channels}) "
            f"sized for CPU runs; it is not meant to reproduce the full-size count."
        )
    per_layer_attn = 2 * d * d + h * d * d
    per_layer_ffn = 2 * d * cfg.ffn_width
    floor = 2 * L * (d * d) * 2  # FFN weights alone with the narrowest plausible width d
    return (
        f"Each encoder layer of width d={d} carries {per_layer_attn:,} attention weights "
        f"(query/key {2 * d * d:,} summed over heads plus {h} full-width value maps of {d * d:,}) "
        f"and {per_layer_ffn:,} FFN weights. With {L} layers in each of 2 branches this is "
        f"{counts['attention'] + counts['ffn_and_norm']:,} parameters before any convolution. "
        f"Even a single d x d FFN pair per layer already needs {floor:,} = {floor / 1e6:.1f} M, "
        f"above the {REFERENCE_PARAMS_M} M reference, so that figure cannot include full-width "
        f"per-head value projections at d={d}; the reference must rest on a narrower internal width or "
        f"shared weights that are not described. The convolutional part "
        f"({counts['reconstruction_and_fusion'] + counts['pose_attention'] + counts['heatmap_decoders']:,}) "
        f"is of the expected order."
    )
