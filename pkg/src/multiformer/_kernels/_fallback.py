"""Pure-Python/numpy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` one-for-one and are used whenever the compiled
extension is missing or ``MF_PURE_PYTHON=1`` is set.
"""

import numpy as np

INF = float("inf")


def hungarian_min(cost):
    """Minimum-cost perfect assignment on a square matrix.

    Shortest augmenting path with row/column potentials, O(n^3).
    Returns ``assign`` with ``assign[row] = col``.
    """
    cost = np.asarray(cost, dtype=np.float64)
    n = cost.shape[0]
    if cost.ndim != 2 or cost.shape[1] != n:
        raise ValueError(f"cost matrix must be square, got {cost.shape}")
    c = cost.tolist()
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    p = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [INF] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = c[i0 - 1]
            ui0 = u[i0]
            delta = INF
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    assign = np.full(n, -1, dtype=np.int64)
    for j in range(1, n + 1):
        if p[j]:
            assign[p[j] - 1] = j - 1
    return assign


def local_maxima(grid, threshold):
    """Cells strictly greater than all in-grid 3x3 neighbours and >= threshold."""
    grid = np.asarray(grid, dtype=np.float64)
    h, w = grid.shape
    padded = np.full((h + 2, w + 2), -INF)
    padded[1:-1, 1:-1] = grid
    keep = grid >= threshold
    for dr in (-1, 0, 1):
        for dc in (-1, 0, 1):
            if dr == 0 and dc == 0:
                continue
            keep &= grid > padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
    rows, cols = np.nonzero(keep)
    return rows.astype(np.int64), cols.astype(np.int64)


def _bilinear(field, x, y):
    h, w = field.shape
    x = min(max(x, 0.0), w - 1.0)
    y = min(max(y, 0.0), h - 1.0)
    x0 = min(int(np.floor(x)), w - 2) if w > 1 else 0
    y0 = min(int(np.floor(y)), h - 2) if h > 1 else 0
    fx = x - x0
    fy = y - y0
    x1 = min(x0 + 1, w - 1)
    y1 = min(y0 + 1, h - 1)
    top = field[y0, x0] * (1.0 - fx) + field[y0, x1] * fx
    bottom = field[y1, x0] * (1.0 - fx) + field[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def paf_pair_scores(paf_x, paf_y, points_a, points_b, n_samples, dot_threshold):
    """Mean PAF projection and above-threshold fraction for every (a, b) pair.

    Sample points are spaced uniformly on the closed segment a->b. Pairs with
    coincident endpoints get NaN score and zero fraction.
    """
    paf_x = np.asarray(paf_x, dtype=np.float64)
    paf_y = np.asarray(paf_y, dtype=np.float64)
    points_a = np.asarray(points_a, dtype=np.float64).reshape(-1, 2)
    points_b = np.asarray(points_b, dtype=np.float64).reshape(-1, 2)
    na, nb = len(points_a), len(points_b)
    scores = np.zeros((na, nb))
    fractions = np.zeros((na, nb))
    if n_samples == 1:
        steps = [0.5]
    else:
        steps = [k / (n_samples - 1) for k in range(n_samples)]
    for i in range(na):
        ax, ay = points_a[i]
        for j in range(nb):
            bx, by = points_b[j]
            dx = bx - ax
            dy = by - ay
            norm = (dx * dx + dy * dy) ** 0.5
            if norm == 0.0:
                scores[i, j] = np.nan
                continue
            ux = dx / norm
            uy = dy / norm
            total = 0.0
            hits = 0
            for t in steps:
                px = ax + t * dx
                py = ay + t * dy
                d = _bilinear(paf_x, px, py) * ux + _bilinear(paf_y, px, py) * uy
                total += d
                if d > dot_threshold:
                    hits += 1
            scores[i, j] = total / n_samples
            fractions[i, j] = hits / n_samples
    return scores, fractions


def col2im(cols, height, width, stride):
    """Scatter-add patch columns (N, C, Ho, Wo, k, k) back onto an (N, C, H, W) grid."""
    n, c, ho, wo, k, _ = cols.shape
    out = np.zeros((n, c, height, width), dtype=cols.dtype)
    for ki in range(k):
        for kj in range(k):
            out[:, :, ki : ki + stride * ho : stride, kj : kj + stride * wo : stride] += cols[:, :, :, :, ki, kj]
    return out
