import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from multiformer.datakit import random_scene, render_labels, render_paf, render_pcm
from multiformer.decoder import (
    KEYPOINTS,
    LIMBS,
    Candidate,
    DecodeParams,
    SkeletonSet,
    assemble,
    decode_poses,
    match_limb,
    nms_peaks,
    paf_score,
)


def cand(x, y, j=0, n=0, score=1.0):
    return Candidate(j, n, float(x), float(y), score)


def bump(size, row, col, sigma=1.5, height=1.0):
    r, c = np.mgrid[0:size, 0:size]
    return height * np.exp(-((r - row) ** 2 + (c - col) ** 2) / (2 * sigma**2))


def scan_oracle(grid, tau):
    """Every cell strictly above all in-grid neighbours, ordered by (-value, row, col)."""
    h, w = grid.shape
    found = []
    for r in range(h):
        for c in range(w):
            v = grid[r, c]
            if v < tau:
                continue
            neigh = [grid[rr, cc] for rr in range(r - 1, r + 2) for cc in range(c - 1, c + 2) if (rr, cc) != (r, c) and 0 <= rr < h and 0 <= cc < w]
            if all(v > u for u in neigh):
                found.append((-v, r, c))
    return [(r, c) for _, r, c in sorted(found)]


def brute_matching(scores, valid):
    na, nb = scores.shape
    best, best_pairs = -1.0, None
    for r in range(min(na, nb) + 1):
        for rows in itertools.combinations(range(na), r):
            for cols in itertools.permutations(range(nb), r):
                pairs = sorted(zip(rows, cols))
                if not all(valid[m, n] for m, n in pairs):
                    continue
                total = math.fsum(scores[m, n] for m, n in pairs)
                if total > best or (total == best and pairs < best_pairs):
                    best, best_pairs = total, pairs
    return best, best_pairs


# ---- peaks ----------------------------------------------------------------
def test_single_bump_peak():
    (c,) = nms_peaks(bump(36, 10, 20), 0.1)
    assert abs(c.y - 10) < 0.5 and abs(c.x - 20) < 0.5


def test_subpixel_refinement_recovers_offset():
    (c,) = nms_peaks(bump(24, 8.3, 12.6), 0.1)
    assert abs(c.y - 8.3) < 1e-9 and abs(c.x - 12.6) < 1e-9
    (coarse,) = nms_peaks(bump(24, 8.3, 12.6), 0.1, refine=False)
    assert (coarse.y, coarse.x) == (8.0, 13.0)


def test_uniform_grid_has_no_peaks():
    assert nms_peaks(np.full((8, 8), 0.7), 0.1) == []


def test_two_equal_bumps_order_by_row_then_col():
    grid = np.maximum(bump(30, 15, 20), bump(30, 15, 10))
    cands = nms_peaks(grid, 0.1)
    assert [(round(c.y), round(c.x)) for c in cands] == scan_oracle(grid, 0.1) == [(15, 10), (15, 20)]
    assert [c.index for c in cands] == [0, 1]


@given(arrays(np.float64, (7, 9), elements=st.sampled_from([0.0, 0.2, 0.5, 0.9, 1.0])), st.sampled_from([0.1, 0.5, 0.95]))
def test_peaks_match_scan_oracle(grid, tau):
    got = [(int(c.y), int(c.x)) for c in nms_peaks(grid, tau, max_candidates=100, refine=False)]
    assert got == scan_oracle(grid, tau)


def test_peaks_truncated_and_threshold_checked():
    grid = np.zeros((20, 20))
    grid[2::4, 2::4] = np.arange(1, 26).reshape(5, 5) / 25
    assert len(nms_peaks(grid, 0.01, max_candidates=8)) == 8
    with pytest.raises(ValueError):
        nms_peaks(grid, 0.0)


# ---- limb scores ----------------------------------------------------------
def test_aligned_and_perpendicular_fields():
    a, b = cand(2, 3), cand(7, 6)
    u = np.array([5.0, 3.0]) / math.hypot(5, 3)
    field = np.stack([np.full((10, 10), u[0]), np.full((10, 10), u[1])])
    s, f = paf_score(a, b, field)
    assert s == pytest.approx(1.0, abs=1e-12) and f == 1.0
    perp = np.stack([np.full((10, 10), -u[1]), np.full((10, 10), u[0])])
    s, f = paf_score(a, b, perp)
    assert abs(s) < 1e-12 and f == 0.0


def test_two_sample_linear_field_closed_form():
    # x-component 0.1 + 0.05 * col; samples land exactly on both endpoints
    cols = np.tile(np.arange(12.0), (8, 1))
    field = np.stack([0.1 + 0.05 * cols, np.zeros((8, 12))])
    s, _ = paf_score(cand(1.5, 2.0), cand(7.25, 2.0), field, n_samples=2)
    assert abs(s - 0.5 * ((0.1 + 0.05 * 1.5) + (0.1 + 0.05 * 7.25))) <= 1e-9


@given(st.integers(0, 2**31))
def test_paf_score_antisymmetric(seed):
    g = np.random.default_rng(seed)
    field = g.standard_normal((2, 9, 9))
    a, b = cand(*g.uniform(0, 8, 2)), cand(*g.uniform(0, 8, 2))
    s_ab, _ = paf_score(a, b, field)
    s_ba, _ = paf_score(b, a, field)
    assert s_ab == pytest.approx(-s_ba, abs=1e-12)


def test_coincident_endpoints_rejected():
    with pytest.raises(ValueError):
        paf_score(cand(1, 1), cand(1, 1), np.zeros((2, 4, 4)))


# ---- matching -------------------------------------------------------------
def test_match_examples():
    assert match_limb([[0.9]]) == [(0, 0, 0.9)]
    got = match_limb([[0.9, 0.8], [0.85, 0.1]])
    assert [(m, n) for m, n, _ in got] == [(0, 1), (1, 0)]
    assert math.fsum(s for *_, s in got) == pytest.approx(1.65)
    assert match_limb([[0.01, 0.04], [0.03, 0.05]]) == []
    assert match_limb([[0.9]], [[0.5]]) == []


@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**31), st.booleans())
def test_match_equals_exhaustive_search(na, nb, seed, coarse):
    g = np.random.default_rng(seed)
    scores = g.integers(0, 5, (na, nb)) / 4.0 if coarse else g.uniform(-0.2, 1.0, (na, nb))
    fractions = g.choice([0.7, 0.9, 1.0], (na, nb))
    got = match_limb(scores, fractions)
    valid = (scores > 0.05) & (fractions >= 0.8)
    best, pairs = brute_matching(scores, valid)
    assert math.fsum(s for *_, s in got) == best
    assert [(m, n) for m, n, _ in got] == pairs
    z = np.zeros((na, nb), int)
    for m, n, _ in got:
        z[m, n] += 1
    assert (z.sum(axis=0) <= 1).all() and (z.sum(axis=1) <= 1).all()


# ---- assembly -------------------------------------------------------------
def _one_person_candidates():
    return [[cand(j, j, j=j)] for j in range(len(KEYPOINTS))]


def test_assemble_full_person():
    skel = assemble([[(0, 0, 1.0)] for _ in LIMBS], _one_person_candidates())
    assert len(skel) == 1 and skel.persons[0].count == 18


def test_assemble_empty():
    assert len(assemble([[] for _ in LIMBS], _one_person_candidates())) == 0


def test_assemble_drops_small_groups_and_conflicts():
    cands = [[cand(j, 0, j=j, n=0), cand(j, 5, j=j, n=1)] for j in range(len(KEYPOINTS))]
    conns = [[] for _ in LIMBS]
    conns[0] = [(0, 0, 1.0)]  # neck0 - rshoulder0
    conns[2] = [(0, 0, 1.0)]  # rshoulder0 - relbow0
    conns[3] = [(0, 0, 1.0)]  # relbow0 - rwrist0
    conns[1] = [(1, 0, 0.5)]  # neck1 - lshoulder0: two-keypoint group, discarded
    conns[6] = [(0, 0, 0.9)]  # neck0 - rhip0 extends person 0
    skel = assemble(conns, cands)
    assert len(skel) == 1
    p = skel.persons[0]
    assert p.count == 5 and np.isnan(p.keypoints[5]).all()


def test_assemble_keeps_one_candidate_per_slot():
    cands = [[cand(j, 0, j=j, n=0), cand(j, 5, j=j, n=1)] for j in range(len(KEYPOINTS))]
    conns = [[] for _ in LIMBS]
    conns[0] = [(0, 0, 1.0)]
    conns[2] = [(0, 0, 1.0), (1, 1, 1.0)]
    conns[3] = [(1, 0, 1.0)]  # would give rwrist0 to the other r_elbow chain
    conns[1] = [(0, 0, 1.0)]
    skel = assemble(conns, cands)
    seen = {}
    for p in skel.persons:
        for j, idx in enumerate(p.candidates):
            if idx is not None:
                assert (j, idx) not in seen
                seen[(j, idx)] = True


# ---- full decode ----------------------------------------------------------
def test_zero_heatmaps_decode_to_nothing():
    assert len(decode_poses(np.zeros((19, 12, 12)), np.zeros((38, 12, 12)))) == 0


@pytest.mark.parametrize("n_persons", [1, 2])
@pytest.mark.parametrize("seed", range(4))
def test_rendered_scene_round_trip(n_persons, seed):
    g = np.random.default_rng(seed)
    persons = [clip[0] for clip in random_scene(g, n_persons, 1)]
    size = 36
    pcm, paf = render_labels(persons, size)
    skel = decode_poses(pcm, paf)
    assert len(skel) == n_persons
    pred = skel.normalized_keypoints()
    for gt in persons:
        err = [np.abs(p - gt).max() for p in pred]
        match = int(np.argmin(err))
        assert np.all(~np.isnan(pred[match]))
        assert np.max(np.linalg.norm(pred[match] - gt, axis=1)) * (size - 1) < 1.0


@given(st.floats(0.2, 20.0), st.integers(0, 50))
def test_decode_invariant_to_pcm_scaling(alpha, seed):
    g = np.random.default_rng(seed)
    persons = [clip[0] for clip in random_scene(g, 2, 1)]
    pcm, paf = render_labels(persons, 24)
    base = decode_poses(pcm, paf)
    scaled = decode_poses(pcm * alpha, paf, DecodeParams(threshold=0.1 * alpha))
    assert len(base) == len(scaled)
    for p, q in zip(base.persons, scaled.persons):
        assert np.allclose(p.keypoints, q.keypoints, equal_nan=True, atol=1e-9)


def test_skeleton_json_round_trip():
    g = np.random.default_rng(3)
    persons = [clip[0] for clip in random_scene(g, 2, 1)]
    skel = decode_poses(*render_labels(persons, 24))
    d = json.loads(skel.to_json())
    assert set(d) == {"persons", "limb_scores", "grid_size"}
    assert len(d["persons"][0]["keypoints"]) == 18
    assert all(0 <= kp["x"] <= 1 and 0 <= kp["y"] <= 1 for p in d["persons"] for kp in p["keypoints"] if kp)
    back = SkeletonSet.from_dict(d)
    for p, q in zip(skel.persons, back.persons):
        assert np.allclose(p.keypoints, q.keypoints, atol=1e-12, equal_nan=True)


def test_render_pcm_paf_inverse_along_limb():
    kp = np.full((18, 2), np.nan)
    kp[1], kp[2] = (0.2, 0.5), (0.6, 0.5)
    paf = render_paf([kp], 20)
    s, f = paf_score(cand(0.2 * 19, 0.5 * 19), cand(0.6 * 19, 0.5 * 19), paf[0:2])
    assert s >= 0.95 and f == 1.0
