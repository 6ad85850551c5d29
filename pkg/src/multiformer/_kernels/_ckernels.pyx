# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in ``_fallback.py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport floor, sqrt, INFINITY, NAN

cnp.import_array()


def hungarian_min(cost):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] c = np.ascontiguousarray(cost, dtype=np.float64)
    cdef Py_ssize_t n = c.shape[0]
    if c.shape[1] != n:
        raise ValueError(f"cost matrix must be square, got {(c.shape[0], c.shape[1])}")
    cdef double[::1] u = np.zeros(n + 1)
    cdef double[::1] v = np.zeros(n + 1)
    cdef double[::1] minv = np.empty(n + 1)
    cdef Py_ssize_t[::1] p = np.zeros(n + 1, dtype=np.intp)
    cdef Py_ssize_t[::1] way = np.zeros(n + 1, dtype=np.intp)
    cdef unsigned char[::1] used = np.zeros(n + 1, dtype=np.uint8)
    cdef Py_ssize_t i, j, j0, j1, i0
    cdef double delta, cur, ui0
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        for j in range(n + 1):
            minv[j] = INFINITY
            used[j] = 0
        while True:
            used[j0] = 1
            i0 = p[j0]
            ui0 = u[i0]
            delta = INFINITY
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = c[i0 - 1, j - 1] - ui0 - v[j]
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
    cdef long long[::1] a = assign
    for j in range(1, n + 1):
        if p[j]:
            a[p[j] - 1] = j - 1
    return assign


def local_maxima(grid, double threshold):
    cdef double[:, ::1] g = np.ascontiguousarray(grid, dtype=np.float64)
    cdef Py_ssize_t h = g.shape[0], w = g.shape[1]
    cdef Py_ssize_t r, col, rr, cc
    cdef int dr, dc
    cdef double val
    cdef bint ok
    rows = []
    cols = []
    for r in range(h):
        for col in range(w):
            val = g[r, col]
            if not (val >= threshold):
                continue
            ok = True
            for dr in range(-1, 2):
                rr = r + dr
                if rr < 0 or rr >= h:
                    continue
                for dc in range(-1, 2):
                    if dr == 0 and dc == 0:
                        continue
                    cc = col + dc
                    if cc < 0 or cc >= w:
                        continue
                    if not (val > g[rr, cc]):
                        ok = False
                        break
                if not ok:
                    break
            if ok:
                rows.append(r)
                cols.append(col)
    return np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64)


cdef inline double _bilinear(double[:, ::1] f, double x, double y) nogil:
    cdef Py_ssize_t h = f.shape[0], w = f.shape[1]
    cdef Py_ssize_t x0, y0, x1, y1
    cdef double fx, fy, top, bottom
    if x < 0.0:
        x = 0.0
    if x > w - 1.0:
        x = w - 1.0
    if y < 0.0:
        y = 0.0
    if y > h - 1.0:
        y = h - 1.0
    x0 = <Py_ssize_t>floor(x)
    y0 = <Py_ssize_t>floor(y)
    if w > 1 and x0 > w - 2:
        x0 = w - 2
    if h > 1 and y0 > h - 2:
        y0 = h - 2
    if w == 1:
        x0 = 0
    if h == 1:
        y0 = 0
    fx = x - x0
    fy = y - y0
    x1 = x0 + 1 if x0 + 1 < w else w - 1
    y1 = y0 + 1 if y0 + 1 < h else h - 1
    top = f[y0, x0] * (1.0 - fx) + f[y0, x1] * fx
    bottom = f[y1, x0] * (1.0 - fx) + f[y1, x1] * fx
    return top * (1.0 - fy) + bottom * fy


def paf_pair_scores(paf_x, paf_y, points_a, points_b, int n_samples, double dot_threshold):
    cdef double[:, ::1] fx = np.ascontiguousarray(paf_x, dtype=np.float64)
    cdef double[:, ::1] fy = np.ascontiguousarray(paf_y, dtype=np.float64)
    cdef double[:, ::1] pa = np.ascontiguousarray(np.asarray(points_a, dtype=np.float64).reshape(-1, 2))
    cdef double[:, ::1] pb = np.ascontiguousarray(np.asarray(points_b, dtype=np.float64).reshape(-1, 2))
    cdef Py_ssize_t na = pa.shape[0], nb = pb.shape[0]
    scores_arr = np.zeros((na, nb))
    fractions_arr = np.zeros((na, nb))
    cdef double[:, ::1] scores = scores_arr
    cdef double[:, ::1] fractions = fractions_arr
    cdef Py_ssize_t i, j
    cdef int k, hits
    cdef double ax, ay, dx, dy, norm, ux, uy, total, t, px, py, d
    for i in range(na):
        ax = pa[i, 0]
        ay = pa[i, 1]
        for j in range(nb):
            dx = pb[j, 0] - ax
            dy = pb[j, 1] - ay
            norm = sqrt(dx * dx + dy * dy)
            if norm == 0.0:
                scores[i, j] = NAN
                continue
            ux = dx / norm
            uy = dy / norm
            total = 0.0
            hits = 0
            for k in range(n_samples):
                if n_samples == 1:
                    t = 0.5
                else:
                    t = (<double>k) / (n_samples - 1)
                px = ax + t * dx
                py = ay + t * dy
                d = _bilinear(fx, px, py) * ux + _bilinear(fy, px, py) * uy
                total += d
                if d > dot_threshold:
                    hits += 1
            scores[i, j] = total / n_samples
            fractions[i, j] = (<double>hits) / n_samples
    return scores_arr, fractions_arr


def col2im(cols, Py_ssize_t height, Py_ssize_t width, Py_ssize_t stride):
    src = np.ascontiguousarray(cols, dtype=np.float64)
    cdef double[:, :, :, :, :, ::1] c = src
    cdef Py_ssize_t n = c.shape[0], ch = c.shape[1], ho = c.shape[2], wo = c.shape[3], k = c.shape[4]
    out_arr = np.zeros((n, ch, height, width))
    cdef double[:, :, :, ::1] out = out_arr
    cdef Py_ssize_t b, q, ki, kj, i, j
    with nogil:
        for b in range(n):
            for q in range(ch):
                for ki in range(k):
                    for kj in range(k):
                        for i in range(ho):
                            for j in range(wo):
                                out[b, q, ki + stride * i, kj + stride * j] += c[b, q, i, j, ki, kj]
    return out_arr.astype(cols.dtype, copy=False)
