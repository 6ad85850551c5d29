"""Ground-truth PCM/PAF rendering from skeleton annotations.

Normalized coordinate u maps to grid coordinate u * (S - 1); x indexes
columns and y indexes rows.
"""

from __future__ import annotations

import numpy as np

from ..decoder.topology import LIMBS, N_KEYPOINTS, N_LIMBS


def _grid_points(persons, size: int) -> list[np.ndarray]:
    return [np.asarray(p, dtype=np.float64).reshape(N_KEYPOINTS, 2) * (size - 1) for p in persons]


def render_pcm(persons, size: int, sigma: float = 1.5) -> np.ndarray:
    """(19, S, S): per-keypoint Gaussian max over persons, channel 19 the mean of the first 18."""
    if sigma <= 0:
        raise ValueError(f"sigma must be positive, got {sigma}")
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    out = np.zeros((N_KEYPOINTS + 1, size, size))
    for kp in _grid_points(persons, size):
        for j in range(N_KEYPOINTS):
            x, y = kp[j]
            if np.isnan(x) or np.isnan(y):
                continue
            g = np.exp(-((cols - x) ** 2 + (rows - y) ** 2) / (2.0 * sigma * sigma))
            np.maximum(out[j], g, out=out[j])
    out[N_KEYPOINTS] = out[:N_KEYPOINTS].mean(axis=0)
    return out


def segment_distance(px, py, a, b) -> np.ndarray:
    """Euclidean distance from grid points to the closed segment a-b."""
    d = b - a
    t = ((px - a[0]) * d[0] + (py - a[1]) * d[1]) / float(d @ d)
    t = np.clip(t, 0.0, 1.0)
    return np.hypot(px - (a[0] + t * d[0]), py - (a[1] + t * d[1]))


def render_paf(persons, size: int, width: float = 1.0) -> np.ndarray:
    """(38, S, S): unit limb direction inside a band of half-width ``width``; overlaps averaged."""
    if width <= 0:
        raise ValueError(f"limb width must be positive, got {width}")
    rows, cols = np.mgrid[0:size, 0:size].astype(np.float64)
    out = np.zeros((2 * N_LIMBS, size, size))
    points = _grid_points(persons, size)
    for k, (ja, jb) in enumerate(LIMBS):
        acc = np.zeros((2, size, size))
        count = np.zeros((size, size))
        for kp in points:
            a, b = kp[ja], kp[jb]
            if np.isnan(a).any() or np.isnan(b).any():
                continue
            length = float(np.hypot(*(b - a)))
            if length == 0.0:
                continue
            u = (b - a) / length
            band = segment_distance(cols, rows, a, b) <= width
            acc[0][band] += u[0]
            acc[1][band] += u[1]
            count[band] += 1
        hit = count > 0
        out[2 * k][hit] = acc[0][hit] / count[hit]
        out[2 * k + 1][hit] = acc[1][hit] / count[hit]
    return out


def render_labels(persons, size: int, sigma: float = 1.5, width: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    return render_pcm(persons, size, sigma), render_paf(persons, size, width)
