"""Heatmaps to multi-person skeletons.

Peaks of every keypoint map become candidates; each limb scores all candidate
pairs by a line integral over its PAF, keeps an optimal one-to-one matching,
and the per-limb connections are merged into persons.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from .topology import KEYPOINTS, LIMBS, N_KEYPOINTS, N_LIMBS, paf_channels


@dataclass(frozen=True)
class DecodeParams:
    threshold: float = 0.1
    max_candidates: int = 8
    n_samples: int = 10
    dot_threshold: float = 0.05
    score_gate: float = 0.05
    fraction_gate: float = 0.8
    min_keypoints: int = 3
    refine: bool = True


@dataclass(frozen=True)
class Candidate:
    keypoint: int
    index: int
    x: float  # column, grid units
    y: float  # row, grid units
    score: float


@dataclass
class Person:
    keypoints: np.ndarray  # (18, 2) grid (x, y); NaN where absent
    scores: np.ndarray  # (18,) peak scores; NaN where absent
    candidates: list  # candidate index per slot or None

    @property
    def count(self) -> int:
        return int(np.sum(~np.isnan(self.scores)))


@dataclass
class SkeletonSet:
    persons: list = field(default_factory=list)
    limb_scores: list = field(default_factory=list)  # (limb, cand_a, cand_b, score) per kept connection
    grid_size: int = 0

    def __len__(self) -> int:
        return len(self.persons)

    def to_dict(self) -> dict:
        scale = 1.0 / (self.grid_size - 1) if self.grid_size > 1 else 1.0
        persons = []
        for p in self.persons:
            kps = []
            for j in range(N_KEYPOINTS):
                if np.isnan(p.scores[j]):
                    kps.append(None)
                else:
                    x, y = p.keypoints[j]
                    kps.append({"name": KEYPOINTS[j], "x": float(x) * scale, "y": float(y) * scale, "score": float(p.scores[j])})
            persons.append({"keypoints": kps})
        limbs = [{"limb": int(k), "a": int(a), "b": int(b), "score": float(s)} for k, a, b, s in self.limb_scores]
        return {"persons": persons, "limb_scores": limbs, "grid_size": self.grid_size}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "SkeletonSet":
        size = int(d.get("grid_size", 0))
        scale = (size - 1) if size > 1 else 1.0
        persons = []
        for pd in d["persons"]:
            kp = np.full((N_KEYPOINTS, 2), np.nan)
            sc = np.full(N_KEYPOINTS, np.nan)
            for j, entry in enumerate(pd["keypoints"]):
                if entry is not None:
                    kp[j] = (entry["x"] * scale, entry["y"] * scale)
                    sc[j] = entry["score"]
            persons.append(Person(kp, sc, [None] * N_KEYPOINTS))
        limbs = [(e["limb"], e["a"], e["b"], e["score"]) for e in d.get("limb_scores", [])]
        return cls(persons, limbs, size)

    def normalized_keypoints(self) -> list[np.ndarray]:
        """Per person (18, 2) coordinates in [0, 1] image space, NaN where absent."""
        scale = 1.0 / (self.grid_size - 1) if self.grid_size > 1 else 1.0
        return [p.keypoints * scale for p in self.persons]


# -- peaks ---------------------------------------------------------------
def _parabolic_offset(left: float, center: float, right: float) -> float:
    # exact for a sampled Gaussian when done on log values
    if left > 0.0 and center > 0.0 and right > 0.0:
        left, center, right = math.log(left), math.log(center), math.log(right)
    denom = left - 2.0 * center + right
    if denom >= 0.0:
        return 0.0
    return min(0.5, max(-0.5, 0.5 * (left - right) / denom))


def nms_peaks(grid, threshold: float = 0.1, max_candidates: int = 8, refine: bool = True, keypoint: int = 0) -> list[Candidate]:
    """Strict 3x3 local maxima >= threshold, best first, ties by (row, col)."""
    if threshold <= 0:
        raise ValueError(f"peak threshold must be positive, got {threshold}")
    grid = np.asarray(grid, dtype=np.float64)
    rows, cols = _kernels.local_maxima(grid, float(threshold))
    if len(rows) == 0:
        return []
    vals = grid[rows, cols]
    order = np.lexsort((cols, rows, -vals))[:max_candidates]
    h, w = grid.shape
    out = []
    for n, i in enumerate(order):
        r, c = int(rows[i]), int(cols[i])
        x, y = float(c), float(r)
        if refine:
            if 0 < c < w - 1:
                x += _parabolic_offset(grid[r, c - 1], grid[r, c], grid[r, c + 1])
            if 0 < r < h - 1:
                y += _parabolic_offset(grid[r - 1, c], grid[r, c], grid[r + 1, c])
        out.append(Candidate(keypoint, n, x, y, float(vals[i])))
    return out


# -- limb scoring and matching ---------------------------------------------
def paf_score(a: Candidate, b: Candidate, paf_pair, n_samples: int = 10, dot_threshold: float = 0.05) -> tuple[float, float]:
    """(mean projection of the field on a->b, fraction of samples above dot_threshold)."""
    if a.x == b.x and a.y == b.y:
        raise ValueError("cannot score a limb between coincident candidates")
    paf_pair = np.asarray(paf_pair, dtype=np.float64)
    s, f = _kernels.paf_pair_scores(paf_pair[0], paf_pair[1], [(a.x, a.y)], [(b.x, b.y)], int(n_samples), float(dot_threshold))
    return float(s[0, 0]), float(f[0, 0])


def score_matrix(cands_a, cands_b, paf_pair, n_samples: int = 10, dot_threshold: float = 0.05):
    paf_pair = np.asarray(paf_pair, dtype=np.float64)
    pa = np.array([(c.x, c.y) for c in cands_a], dtype=np.float64).reshape(-1, 2)
    pb = np.array([(c.x, c.y) for c in cands_b], dtype=np.float64).reshape(-1, 2)
    return _kernels.paf_pair_scores(paf_pair[0], paf_pair[1], pa, pb, int(n_samples), float(dot_threshold))


def _optimum(weights: np.ndarray, rows, cols) -> float:
    """Best total of a one-to-one matching restricted to ``rows`` x ``cols`` (weights >= 0)."""
    if not rows or not cols:
        return 0.0
    sub = weights[np.ix_(rows, cols)]
    n = max(sub.shape)
    cost = np.zeros((n, n))
    cost[: sub.shape[0], : sub.shape[1]] = -sub
    assign = _kernels.hungarian_min(cost)
    return float(sum(sub[i, assign[i]] for i in range(sub.shape[0]) if assign[i] < sub.shape[1]))


def match_limb(scores, fractions=None, score_gate: float = 0.05, fraction_gate: float = 0.8) -> list[tuple[int, int, float]]:
    """Maximum-total matching among pairs that pass both gates.

    Returns (m, n, score) with zero-based indices, sorted by (m, n). Among
    matchings with the same total (to 1e-12 relative) the lexicographically
    smallest pair list wins: rows are fixed in order, each to the smallest
    column that still allows the optimum.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.ndim != 2 or scores.size == 0:
        return []
    valid = np.isfinite(scores) & (scores > score_gate)
    if fractions is not None:
        valid &= np.asarray(fractions) >= fraction_gate
    if not valid.any():
        return []
    na, nb = scores.shape
    weights = np.where(valid, scores, 0.0)
    rows, cols = list(range(na)), list(range(nb))
    target = _optimum(weights, rows, cols)
    tol = 1e-12 * max(1.0, abs(target))
    out = []
    for m in range(na):
        rows.remove(m)
        for n in cols:
            if not valid[m, n]:
                continue
            rest = [c for c in cols if c != n]
            if weights[m, n] + _optimum(weights, rows, rest) >= target - tol:
                out.append((m, n, float(scores[m, n])))
                target -= weights[m, n]
                cols = rest
                break
    return out


# -- grouping --------------------------------------------------------------
def assemble(connections, candidates, min_keypoints: int = 3) -> SkeletonSet:
    """Merge per-limb connections into persons.

    ``connections[k]`` holds (m, n, score) for limb k between candidates of
    its two keypoints; ``candidates[j]`` is the candidate list of keypoint j.
    A connection joining two persons is kept only when they share no occupied
    keypoint slot; a connection whose endpoint slot is already held by another
    candidate is dropped.
    """
    people: list[dict] = []  # {"slots": [idx|None]*18, "score": float}
    kept = []
    for k, (ja, jb) in enumerate(LIMBS):
        for m, n, s in connections[k] if k < len(connections) else ():
            pa = next((p for p in people if p["slots"][ja] == m), None)
            pb = next((p for p in people if p["slots"][jb] == n), None)
            if pa is None and pb is None:
                slots = [None] * N_KEYPOINTS
                slots[ja], slots[jb] = m, n
                people.append({"slots": slots, "score": s})
            elif pa is not None and pb is None:
                if pa["slots"][jb] is not None:
                    continue
                pa["slots"][jb] = n
                pa["score"] += s
            elif pa is None:
                if pb["slots"][ja] is not None:
                    continue
                pb["slots"][ja] = m
                pb["score"] += s
            elif pa is not pb:
                if any(x is not None and y is not None for x, y in zip(pa["slots"], pb["slots"])):
                    continue
                pa["slots"] = [x if x is not None else y for x, y in zip(pa["slots"], pb["slots"])]
                pa["score"] += pb["score"] + s
                people.remove(pb)
            else:
                pa["score"] += s
            kept.append((k, m, n, s))
    persons = []
    for p in people:
        if sum(x is not None for x in p["slots"]) < min_keypoints:
            continue
        kp = np.full((N_KEYPOINTS, 2), np.nan)
        sc = np.full(N_KEYPOINTS, np.nan)
        for j, idx in enumerate(p["slots"]):
            if idx is not None:
                c = candidates[j][idx]
                kp[j] = (c.x, c.y)
                sc[j] = c.score
        persons.append(Person(kp, sc, list(p["slots"])))
    return SkeletonSet(persons, kept)


def decode_poses(pcm, paf, params: DecodeParams | None = None) -> SkeletonSet:
    """(>=18, S, S) PCM and (38, S, S) PAF -> SkeletonSet in grid coordinates."""
    params = params or DecodeParams()
    pcm = np.asarray(pcm, dtype=np.float64)
    paf = np.asarray(paf, dtype=np.float64)
    if pcm.ndim != 3 or pcm.shape[0] < N_KEYPOINTS or paf.shape != (2 * N_LIMBS, *pcm.shape[1:]):
        raise ValueError(f"expected PCM (19, S, S) and PAF (38, S, S), got {pcm.shape} and {paf.shape}")
    candidates = [
        nms_peaks(pcm[j], params.threshold, params.max_candidates, params.refine, keypoint=j) for j in range(N_KEYPOINTS)
    ]
    connections = []
    for k, (ja, jb) in enumerate(LIMBS):
        ca, cb = candidates[ja], candidates[jb]
        if not ca or not cb:
            connections.append([])
            continue
        cx, cy = paf_channels(k)
        scores, fractions = score_matrix(ca, cb, paf[[cx, cy]], params.n_samples, params.dot_threshold)
        connections.append(match_limb(scores, fractions, params.score_gate, params.fraction_gate))
    skel = assemble(connections, candidates, params.min_keypoints)
    skel.grid_size = pcm.shape[-1]
    return skel
