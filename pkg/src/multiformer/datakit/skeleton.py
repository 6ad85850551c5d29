"""Random 18-keypoint skeletons and short motion clips in normalized image space.

Coordinates are (x, y) in [0, 1]^2 with y pointing down. Persons in one scene
occupy disjoint vertical slots so they never overlap.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..decoder.topology import N_KEYPOINTS

# segment lengths as fractions of body height
_SHOULDER = 0.12
_HIP = 0.07
_UPPER_ARM = 0.17
_FOREARM = 0.16
_TORSO = 0.35
_THIGH = 0.23
_SHIN = 0.22
_HEAD = 0.13


@dataclass
class PoseAngles:
    """Joint angles in radians, measured from straight down, positive = outward."""

    upper_arm: np.ndarray  # (2,) right, left
    forearm: np.ndarray
    thigh: np.ndarray
    shin: np.ndarray
    lean: float = 0.0


def random_angles(rng: np.random.Generator) -> PoseAngles:
    upper = rng.uniform(0.1, 1.2, 2)
    thigh = rng.uniform(0.0, 0.35, 2)
    return PoseAngles(
        upper_arm=upper,
        forearm=upper + rng.uniform(-0.3, 0.9, 2),
        thigh=thigh,
        shin=thigh + rng.uniform(-0.25, 0.1, 2),
        lean=float(rng.uniform(-0.08, 0.08)),
    )


def _limb(start, length, angle, side):
    return start + length * np.array([side * np.sin(angle), np.cos(angle)])


def build_pose(angles: PoseAngles) -> np.ndarray:
    """Unit-height skeleton with the neck at the origin, (18, 2)."""
    kp = np.zeros((N_KEYPOINTS, 2))
    c, s = np.cos(angles.lean), np.sin(angles.lean)
    neck = np.zeros(2)
    kp[1] = neck
    nose = neck + _HEAD * np.array([s, -c])
    kp[0] = nose
    kp[14] = nose + np.array([-0.035, -0.03])
    kp[15] = nose + np.array([0.035, -0.03])
    kp[16] = nose + np.array([-0.07, -0.01])
    kp[17] = nose + np.array([0.07, -0.01])
    # (shoulder, elbow, wrist, hip, knee, ankle) slots for right (image left) and left
    for i, (side, slots) in enumerate(((-1.0, (2, 3, 4, 8, 9, 10)), (1.0, (5, 6, 7, 11, 12, 13)))):
        sh, el, wr, hp, kn, an = slots
        kp[sh] = neck + np.array([side * _SHOULDER, 0.0])
        kp[el] = _limb(kp[sh], _UPPER_ARM, angles.upper_arm[i], side)
        kp[wr] = _limb(kp[el], _FOREARM, angles.forearm[i], side)
        kp[hp] = neck + np.array([side * _HIP - s * _TORSO, c * _TORSO])
        kp[kn] = _limb(kp[hp], _THIGH, angles.thigh[i], side)
        kp[an] = _limb(kp[kn], _SHIN, angles.shin[i], side)
    return kp


@dataclass
class MotionScript:
    """Sinusoidal joint motion around a base pose."""

    base: PoseAngles
    amplitude: float
    freq_hz: np.ndarray  # (4,) upper arm, forearm, thigh, shin
    phase: np.ndarray  # (4,)

    def at(self, t: float) -> PoseAngles:
        w = self.amplitude * np.sin(2.0 * np.pi * self.freq_hz * t + self.phase)
        b = self.base
        return PoseAngles(b.upper_arm + w[0], b.forearm + w[1], b.thigh + 0.5 * w[2], b.shin + 0.5 * w[3], b.lean)


def random_motion(rng: np.random.Generator, amplitude: float = 0.15) -> MotionScript:
    return MotionScript(random_angles(rng), amplitude, rng.uniform(0.5, 1.5, 4), rng.uniform(0.0, 2 * np.pi, 4))


def place_clip(clips: list[np.ndarray], rng: np.random.Generator, margin: float = 0.06, max_height: float = 0.85) -> list[np.ndarray]:
    """Scale and translate unit-height clips (T, 18, 2) into disjoint vertical slots of the image."""
    k = len(clips)
    slot_w = (1.0 - 2 * margin) / k
    placed = []
    for i, clip in enumerate(clips):
        lo = clip.reshape(-1, 2).min(axis=0)
        hi = clip.reshape(-1, 2).max(axis=0)
        size = hi - lo
        fit = min(max_height / size[1], (slot_w - margin) / size[0])
        scale = fit * rng.uniform(0.75, 1.0)
        ext = size * scale
        x0 = margin + i * slot_w + rng.uniform(0.0, slot_w - margin - ext[0]) + 0.5 * margin
        y0 = margin + rng.uniform(0.0, 1.0 - 2 * margin - ext[1])
        placed.append((clip - lo) * scale + np.array([x0, y0]))
    return placed


def random_scene(rng: np.random.Generator, n_persons: int, n_frames: int, rate: float = 50.0, amplitude: float = 0.15) -> list[np.ndarray]:
    """One (n_frames, 18, 2) trajectory per person, all inside [0, 1]^2 and non-overlapping."""
    if n_persons < 1:
        raise ValueError(f"a scene needs at least one person, got {n_persons}")
    times = np.arange(n_frames) / rate
    clips = []
    for _ in range(n_persons):
        script = random_motion(rng, amplitude)
        clips.append(np.stack([build_pose(script.at(t)) for t in times]))
    return place_clip(clips, rng)
