"""Toy multipath CSI: every keypoint is a point scatterer in a flat 9 m x 6 m room.

Normalized image x spans the room width; normalized image y is mapped to
depth so that every keypoint has a distinct transmitter-scatterer-receiver
path. This is a stand-in with the right tensor layout and a pose-dependent
signal, not an electromagnetic model.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from ..frontend.csi import CsiWindow
from .skeleton import random_scene

C_LIGHT = 299_792_458.0


@dataclass(frozen=True)
class SceneConfig:
    n_persons: int = 1
    noise_sigma: float = 0.05
    carrier_hz: float = 5.32e9
    subcarrier_spacing_hz: float = 625e3
    n_subcarriers: int = 30
    n_packets: int = 10
    n_rx: int = 3
    sample_rate: float = 50.0
    gain: float = 1.0  # per-keypoint scatterer gain
    room: tuple[float, float] = (9.0, 6.0)
    tx: tuple[float, float] = (0.5, 3.0)
    rx_center: tuple[float, float] = (8.5, 3.0)
    motion_amplitude: float = 0.15

    def __post_init__(self):
        if self.n_persons < 1:
            raise ValueError(f"n_persons must be >= 1, got {self.n_persons}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.n_packets < 2:
            raise ValueError(f"a window needs at least 2 packets, got {self.n_packets}")

    @property
    def wavelength(self) -> float:
        return C_LIGHT / self.carrier_hz

    def subcarrier_freqs(self) -> np.ndarray:
        offsets = np.arange(self.n_subcarriers) - (self.n_subcarriers - 1) / 2.0
        return self.carrier_hz + offsets * self.subcarrier_spacing_hz

    def rx_positions(self) -> np.ndarray:
        # linear array along the room depth axis, half-wavelength spacing
        offsets = (np.arange(self.n_rx) - (self.n_rx - 1) / 2.0) * 0.5 * self.wavelength
        return np.stack([np.full(self.n_rx, self.rx_center[0]), self.rx_center[1] + offsets], axis=1)

    def to_dict(self) -> dict:
        return asdict(self)


def room_positions(keypoints: np.ndarray, cfg: SceneConfig) -> np.ndarray:
    """Normalized (.., 2) image coordinates -> room-plane metres."""
    w, d = cfg.room
    kp = np.asarray(keypoints, dtype=np.float64)
    x = 0.15 * w + 0.7 * w * kp[..., 0]
    y = 0.2 * d + 0.6 * d * kp[..., 1]
    return np.stack([x, y], axis=-1)


def synth_csi(frames, cfg: SceneConfig, rng: np.random.Generator) -> CsiWindow:
    """Channel responses for T frames.

    ``frames[i]`` lists the (18, 2) normalized keypoints of every person at
    packet i. Absent (NaN) keypoints do not scatter.
    """
    t = len(frames)
    if t < 2:
        raise ValueError(f"a CSI window needs T >= 2 frames, got {t}")
    freqs = cfg.subcarrier_freqs()
    tx = np.asarray(cfg.tx)
    rxs = cfg.rx_positions()
    h = np.zeros((t, cfg.n_rx, cfg.n_subcarriers), dtype=np.complex128)
    for i, persons in enumerate(frames):
        pts = room_positions(np.concatenate([np.asarray(p).reshape(-1, 2) for p in persons]), cfg)
        pts = pts[~np.isnan(pts).any(axis=1)]
        d_tx = np.linalg.norm(pts - tx, axis=1)
        for n in range(cfg.n_rx):
            delay = (d_tx + np.linalg.norm(pts - rxs[n], axis=1)) / C_LIGHT
            h[i, n] = cfg.gain * np.exp(-2j * np.pi * np.outer(delay, freqs)).sum(axis=0)
    if cfg.noise_sigma > 0:
        scale = cfg.noise_sigma / np.sqrt(2.0)
        h += scale * (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape))
    return CsiWindow(h, n_tx=1, n_rx=cfg.n_rx, sample_rate=cfg.sample_rate)


@dataclass
class SceneSample:
    window: CsiWindow
    persons: list  # (18, 2) normalized keypoints per person at the labeled frame
    frame: int = 0
    scene: int = 0
    meta: dict = field(default_factory=dict)


def make_sample(rng: np.random.Generator, cfg: SceneConfig, scene_id: int = 0) -> SceneSample:
    """Random non-overlapping scene; the label is the pose at the centre packet."""
    clips = random_scene(rng, cfg.n_persons, cfg.n_packets, cfg.sample_rate, cfg.motion_amplitude)
    frames = [[clip[i] for clip in clips] for i in range(cfg.n_packets)]
    label = cfg.n_packets // 2
    window = synth_csi(frames, cfg, rng)
    return SceneSample(window, [clip[label] for clip in clips], frame=label, scene=scene_id)
