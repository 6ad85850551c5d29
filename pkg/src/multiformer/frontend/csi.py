"""CSI windows, their binary file format, and time/frequency tokenization."""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field

import numpy as np

from ..numerics.tensor import ConfigurationError, DimensionError
from .resample import resample_axis

CSI_MAGIC = b"CSIT"
CSI_VERSION = 1
_HEADER = struct.Struct("<4sH4Id")


class CsiFormatError(Exception):
    """Unreadable, truncated or wrong-version CSI file."""


@dataclass
class CsiWindow:
    """Complex channel responses indexed (packet, link, subcarrier).

    Links are ordered transmit-major: link = m * n_rx + n.
    """

    samples: np.ndarray
    n_tx: int = 1
    n_rx: int = 3
    sample_rate: float = 50.0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.samples = np.asarray(self.samples)
        if self.samples.ndim != 3:
            raise DimensionError(f"CSI samples must be (T, links, subcarriers), got {self.samples.shape}")
        t, links, _ = self.samples.shape
        if t < 2:
            raise ConfigurationError(f"a CSI window needs T >= 2 packets, got {t}")
        if links != self.n_tx * self.n_rx:
            raise DimensionError(f"link axis {links} != n_tx*n_rx = {self.n_tx}*{self.n_rx}")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("CSI samples contain non-finite values")

    @property
    def shape(self):
        return self.samples.shape


def amplitude(window: CsiWindow | np.ndarray) -> np.ndarray:
    samples = window.samples if isinstance(window, CsiWindow) else np.asarray(window)
    return np.abs(samples)


def upsample_grid(amp: np.ndarray, packets: int, subcarriers: int) -> np.ndarray:
    """(T, links, N_raw) amplitudes -> (packets, links, subcarriers) grid."""
    grid = resample_axis(amp, packets, axis=0)
    return resample_axis(grid, subcarriers, axis=2)


def make_tokens(grid: np.ndarray, branch: str) -> np.ndarray:
    """Regroup an (M, links, N_S) amplitude grid into raw tokens.

    ``frequency``: N_S rows; row j lists link 1 over all packets, then link 2, ...
    ``temporal``: M rows; row i lists subcarrier 1 over all links, then subcarrier 2, ...
    """
    grid = np.asarray(grid)
    if grid.ndim != 3:
        raise DimensionError(f"amplitude grid must be (M, links, N_S), got {grid.shape}")
    m, links, ns = grid.shape
    if branch == "frequency":
        return np.ascontiguousarray(grid.transpose(2, 1, 0)).reshape(ns, links * m)
    if branch == "temporal":
        return np.ascontiguousarray(grid.transpose(0, 2, 1)).reshape(m, ns * links)
    raise ConfigurationError(f"unknown token branch {branch!r}")


def tokenize_window(window: CsiWindow, packets: int, subcarriers: int) -> tuple[np.ndarray, np.ndarray]:
    """Full preprocessing: amplitude, two-axis upsampling, both token matrices."""
    grid = upsample_grid(amplitude(window), packets, subcarriers)
    return make_tokens(grid, "frequency"), make_tokens(grid, "temporal")


def write_csi(path, window: CsiWindow) -> None:
    t, _, ns = window.samples.shape
    header = _HEADER.pack(CSI_MAGIC, CSI_VERSION, t, window.n_tx, window.n_rx, ns, float(window.sample_rate))
    samples = np.asarray(window.samples, dtype=np.complex64)
    inter = np.empty(samples.shape + (2,), dtype="<f4")
    inter[..., 0] = samples.real
    inter[..., 1] = samples.imag
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(inter.tobytes())
    os.replace(tmp, path)


def read_csi(path) -> CsiWindow:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise CsiFormatError(f"{path}: {exc.strerror}") from exc
    if len(blob) < _HEADER.size:
        raise CsiFormatError(f"{path}: truncated header")
    magic, version, t, n_tx, n_rx, ns, rate = _HEADER.unpack_from(blob, 0)
    if magic != CSI_MAGIC:
        raise CsiFormatError(f"{path}: bad magic {magic!r}")
    if version != CSI_VERSION:
        raise CsiFormatError(f"{path}: unsupported CSI format version {version}")
    count = t * n_tx * n_rx * ns * 2
    body = blob[_HEADER.size :]
    if len(body) != count * 4:
        raise CsiFormatError(f"{path}: expected {count * 4} payload bytes, found {len(body)}")
    inter = np.frombuffer(body, dtype="<f4").reshape(t, n_tx * n_rx, ns, 2)
    samples = (inter[..., 0] + 1j * inter[..., 1]).astype(np.complex64)
    try:
        return CsiWindow(samples, n_tx=n_tx, n_rx=n_rx, sample_rate=rate, meta={"path": os.fspath(path)})
    except (ValueError, ConfigurationError) as exc:
        raise CsiFormatError(f"{path}: {exc}") from exc
