import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from multiformer.frontend import (
    CsiFormatError,
    CsiWindow,
    TokenEmbedding,
    amplitude,
    lowpass_taps,
    make_tokens,
    rational_factors,
    read_csi,
    resample,
    resample_axis,
    resample_matrix,
    tokenize_window,
    write_csi,
)
from multiformer.numerics import ConfigurationError, DimensionError, no_grad


# ---- oracles --------------------------------------------------------------
def tokens_oracle(grid, branch):
    """Index-by-index regrouping written from the token definitions."""
    m, links, ns = grid.shape
    if branch == "frequency":
        return np.array([[grid[i, n, s] for n in range(links) for i in range(m)] for s in range(ns)])
    return np.array([[grid[i, n, s] for s in range(ns) for n in range(links)] for i in range(m)])


def resample_oracle(x, m):
    """Zero-stuff, FIR-filter and decimate with explicit loops."""
    n = len(x)
    up, down = rational_factors(n, m)
    taps = lowpass_taps(up, down)
    half = (len(taps) - 1) // 2
    pad = half // up + 2
    xp = np.concatenate([x[:pad][::-1], x, x[::-1][:pad]])
    stuffed = np.zeros(len(xp) * up)
    for i, v in enumerate(xp):
        stuffed[i * up] = v
    out = np.zeros(m)
    for k in range(m):
        centre = k * down + pad * up
        acc = 0.0
        for t in range(-half, half + 1):
            j = centre - t
            if 0 <= j < len(stuffed):
                acc += taps[t + half] * stuffed[j]
        out[k] = acc
    return out


# ---- amplitude ------------------------------------------------------------
def test_amplitude_examples(rng):
    assert amplitude(np.array([3 + 4j])) == 5.0
    assert amplitude(np.array([-2.0 + 0j])) == 2.0
    z = rng.standard_normal((4, 3, 5)) + 1j * rng.standard_normal((4, 3, 5))
    assert np.array_equal(amplitude(CsiWindow(z)), np.sqrt(z.real**2 + z.imag**2)) or np.allclose(
        amplitude(CsiWindow(z)), np.sqrt(z.real**2 + z.imag**2), rtol=1e-15, atol=0
    )


def test_window_validation():
    with pytest.raises(ConfigurationError):
        CsiWindow(np.ones((1, 3, 4), complex))
    with pytest.raises(DimensionError):
        CsiWindow(np.ones((4, 2, 4), complex))


# ---- resampling -----------------------------------------------------------
def test_rational_factors():
    assert rational_factors(10, 64) == (32, 5)
    assert rational_factors(30, 64) == (32, 15)


def test_filter_shape():
    taps = lowpass_taps(32, 5)
    assert len(taps) == 4 * 32 + 1
    assert np.allclose(taps, taps[::-1])
    assert taps.sum() == pytest.approx(32.0, rel=1e-12)


@pytest.mark.parametrize("n,m", [(10, 64), (30, 64), (10, 16), (30, 32), (7, 7), (5, 12)])
def test_resample_matches_loop_oracle(n, m, rng):
    x = rng.standard_normal(n)
    out = resample(x, m)
    assert out.shape == (m,)
    assert np.allclose(out, resample_oracle(x, m), atol=1e-12)
    assert np.allclose(resample_matrix(n, m) @ x, out, atol=1e-12)


@pytest.mark.parametrize("n,m", [(10, 64), (30, 64)])
def test_resample_preserves_dc(n, m):
    out = resample(np.full(n, 2.5), m)
    assert np.max(np.abs(out[2:-2] - 2.5)) <= 1e-6


def test_resample_single_tone():
    n, m = 30, 64
    x = np.sin(2 * np.pi * 0.05 * np.arange(n))
    out = resample(x, m)
    t = np.arange(m) * n / m
    ref = np.sin(2 * np.pi * 0.05 * t)
    inner = slice(m // 8, -m // 8)
    rms = np.sqrt(np.mean((out[inner] - ref[inner]) ** 2)) / np.sqrt(np.mean(ref[inner] ** 2))
    assert rms < 0.02


def test_resample_rejects_downsampling():
    with pytest.raises(ConfigurationError):
        resample(np.ones(10), 5)
    with pytest.raises(ConfigurationError):
        resample(np.ones(1), 5)


@given(st.integers(2, 20), st.integers(0, 40), st.floats(-5, 5), st.floats(-5, 5), st.integers(0, 2**31))
def test_resample_is_linear(n, extra, a, b, seed):
    g = np.random.default_rng(seed)
    x, y = g.standard_normal(n), g.standard_normal(n)
    m = n + extra
    lhs = resample(a * x + b * y, m)
    rhs = a * resample(x, m) + b * resample(y, m)
    assert np.max(np.abs(lhs - rhs)) <= 1e-9


def test_resample_axis_matches_1d(rng):
    x = rng.standard_normal((10, 3, 30))
    out = resample_axis(x, 64, axis=2)
    assert out.shape == (10, 3, 64)
    assert np.allclose(out[4, 1], resample(x[4, 1], 64), atol=1e-12)


# ---- tokens ---------------------------------------------------------------
def test_token_index_example():
    m, links, ns = 2, 2, 2
    grid = np.zeros((m, links, ns))
    for i in range(m):
        for n in range(links):
            for s in range(ns):
                grid[i, n, s] = 100 * (s + 1) + 10 * (n + 1) + (i + 1)
    assert make_tokens(grid, "frequency")[0].tolist() == [111, 112, 121, 122]
    assert make_tokens(grid, "temporal")[1].tolist() == [112, 122, 212, 222]
    assert not make_tokens(np.zeros((2, 2, 2)), "frequency").any()


@given(st.integers(1, 6), st.integers(1, 4), st.integers(1, 6), st.integers(0, 2**31))
def test_tokens_match_oracle_and_preserve_values(m, links, ns, seed):
    grid = np.random.default_rng(seed).random((m, links, ns))
    f, t = make_tokens(grid, "frequency"), make_tokens(grid, "temporal")
    assert f.shape == (ns, m * links) and t.shape == (m, ns * links)
    assert np.array_equal(f, tokens_oracle(grid, "frequency"))
    assert np.array_equal(t, tokens_oracle(grid, "temporal"))
    assert np.array_equal(np.sort(f.ravel()), np.sort(grid.ravel()))
    assert np.array_equal(np.sort(t.ravel()), np.sort(grid.ravel()))


def test_unknown_branch():
    with pytest.raises(ConfigurationError):
        make_tokens(np.zeros((2, 2, 2)), "space")


def test_tokenize_window_full_size(rng):
    w = CsiWindow(rng.standard_normal((10, 3, 30)) + 1j * rng.standard_normal((10, 3, 30)))
    f, t = tokenize_window(w, 64, 64)
    assert f.shape == (64, 192) and t.shape == (64, 192)


# ---- embedding ------------------------------------------------------------
def test_embedding_zero_projection_gives_zero(rng, f64):
    emb = TokenEmbedding(4, 6, 9, rng)
    emb.proj.weight.data[:] = 0
    emb.embedding.data[:] = 0
    assert not emb.embed(rng.random((2, 4, 6))).data.any()


def test_embedding_identity_projection_passes_tokens(rng, f64):
    emb = TokenEmbedding(4, 9, 9, rng)
    emb.proj.weight.data = np.eye(9)
    emb.embedding.data[:] = 0
    x = rng.random((2, 4, 9))
    assert np.array_equal(emb.embed(x).data, x)


def test_embedding_width_mismatch(rng):
    with pytest.raises(DimensionError):
        TokenEmbedding(4, 6, 9, rng).embed(np.zeros((2, 4, 5)))


def test_embedding_full_size_shape(rng):
    emb = TokenEmbedding(64, 192, 1296, rng).eval()
    with no_grad():
        assert emb(np.zeros((1, 64, 192))).shape == (1, 64, 1296)


# ---- CSI file format ------------------------------------------------------
def test_csi_round_trip_and_layout(tmp_path, rng):
    z = (rng.standard_normal((10, 3, 30)) + 1j * rng.standard_normal((10, 3, 30))).astype(np.complex64)
    path = tmp_path / "w.csit"
    write_csi(path, CsiWindow(z, sample_rate=100.0))
    back = read_csi(path)
    assert np.array_equal(back.samples, z) and back.sample_rate == 100.0
    blob = path.read_bytes()
    assert blob[:4] == b"CSIT"
    assert np.frombuffer(blob[6:22], "<u4").tolist() == [10, 1, 3, 30]
    body = np.frombuffer(blob[30:], "<f4")
    assert body[0] == z[0, 0, 0].real and body[1] == z[0, 0, 0].imag and body[2] == z[0, 0, 1].real


def test_csi_corruption(tmp_path, rng):
    path = tmp_path / "w.csit"
    write_csi(path, CsiWindow(np.ones((4, 3, 5), np.complex64)))
    blob = path.read_bytes()
    path.write_bytes(blob[:-3])
    with pytest.raises(CsiFormatError, match="w.csit"):
        read_csi(path)
    path.write_bytes(blob[:10])
    with pytest.raises(CsiFormatError, match="truncated"):
        read_csi(path)
    path.write_bytes(b"NOPE" + blob[4:])
    with pytest.raises(CsiFormatError, match="magic"):
        read_csi(path)
    path.write_bytes(blob[:4] + b"\x07\x00" + blob[6:])
    with pytest.raises(CsiFormatError, match="version"):
        read_csi(path)
