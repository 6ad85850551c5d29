"""Rational polyphase upsampling with a Hamming-windowed sinc low-pass."""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache

import numpy as np

from ..numerics.tensor import ConfigurationError


def rational_factors(n: int, m: int) -> tuple[int, int]:
    """Return (up, down) with up/down = m/n in lowest terms."""
    f = Fraction(m, n)
    return f.numerator, f.denominator


def lowpass_taps(up: int, down: int) -> np.ndarray:
    """Windowed-sinc prototype with cutoff pi/max(up, down) and passband gain ``up``.

    Each polyphase branch is rescaled to sum to exactly 1 so a constant input
    is reproduced to rounding error.
    """
    r = max(up, down)
    length = 4 * r + 1
    k = np.arange(length) - (length - 1) / 2
    taps = np.sinc(k / r) * np.hamming(length)
    taps *= up / taps.sum()
    for phase in range(up):
        branch = taps[phase::up]
        taps[phase::up] = branch / branch.sum()
    return taps


@lru_cache(maxsize=64)
def resample_matrix(n: int, m: int) -> np.ndarray:
    """Dense (m, n) operator equivalent to :func:`resample` on length-n input."""
    if n < 2:
        raise ConfigurationError(f"resample needs at least 2 input samples, got {n}")
    if m < n:
        raise ConfigurationError(f"downsampling {n} -> {m} is not supported")
    up, down = rational_factors(n, m)
    taps = lowpass_taps(up, down)
    half = (len(taps) - 1) // 2
    # input samples reachable by the filter from any output position
    pad = half // up + 2
    n_pad = n + 2 * pad
    # output k sits at input coordinate k*down/up, i.e. upsampled index (k + pad*up/down)*down
    out = np.zeros((m, n_pad))
    for k in range(m):
        centre = k * down + pad * up  # index in the zero-stuffed padded signal
        for i in range(n_pad):
            offset = centre - i * up
            if -half <= offset <= half:
                out[k, i] = taps[offset + half]
    # fold the symmetric padding back onto the real samples
    src = np.pad(np.arange(n), pad, mode="symmetric")
    mat = np.zeros((m, n))
    for i, j in enumerate(src):
        mat[:, j] += out[:, i]
    mat.setflags(write=False)
    return mat


def resample(x, m: int) -> np.ndarray:
    """Resample a 1-D real sequence of length n to length m (m >= n).

    Zero-insertion by ``up``, low-pass filtering, decimation by ``down`` with
    up/down = m/n; edges use symmetric padding.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ConfigurationError(f"resample expects a 1-D sequence, got shape {x.shape}")
    return _resample_direct(x, m)


def _resample_direct(x: np.ndarray, m: int) -> np.ndarray:
    n = len(x)
    if n < 2:
        raise ConfigurationError(f"resample needs at least 2 input samples, got {n}")
    if m < n:
        raise ConfigurationError(f"downsampling {n} -> {m} is not supported")
    up, down = rational_factors(n, m)
    taps = lowpass_taps(up, down)
    half = (len(taps) - 1) // 2
    pad = half // up + 2
    xp = np.pad(x, pad, mode="symmetric")
    stuffed = np.zeros(len(xp) * up)
    stuffed[::up] = xp
    filtered = np.convolve(stuffed, taps, mode="full")
    # full-mode output index j corresponds to stuffed index j - half
    idx = np.arange(m) * down + pad * up + half
    return filtered[idx]


def resample_axis(x: np.ndarray, m: int, axis: int) -> np.ndarray:
    """Apply :func:`resample` along one axis of an array."""
    x = np.asarray(x, dtype=np.float64)
    mat = resample_matrix(x.shape[axis], m)
    moved = np.moveaxis(x, axis, -1)
    return np.moveaxis(moved @ mat.T, -1, axis)
