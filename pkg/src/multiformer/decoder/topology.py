"""Keypoint names and the 19 limb connections (zero-based keypoint indices)."""

from __future__ import annotations

KEYPOINTS = (
    "nose",
    "neck",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_hip",
    "r_knee",
    "r_ankle",
    "l_hip",
    "l_knee",
    "l_ankle",
    "r_eye",
    "l_eye",
    "r_ear",
    "l_ear",
)
N_KEYPOINTS = len(KEYPOINTS)

# limb k is scored on PAF channels (2k, 2k+1) = (x, y) components
LIMBS = (
    (1, 2),
    (1, 5),
    (2, 3),
    (3, 4),
    (5, 6),
    (6, 7),
    (1, 8),
    (8, 9),
    (9, 10),
    (1, 11),
    (11, 12),
    (12, 13),
    (1, 0),
    (0, 14),
    (14, 16),
    (0, 15),
    (15, 17),
    (2, 16),
    (5, 17),
)
N_LIMBS = len(LIMBS)

KEYPOINT_INDEX = {name: i for i, name in enumerate(KEYPOINTS)}
R_SHOULDER = KEYPOINT_INDEX["r_shoulder"]
L_HIP = KEYPOINT_INDEX["l_hip"]


def paf_channels(limb: int) -> tuple[int, int]:
    return 2 * limb, 2 * limb + 1


def limb_name(limb: int) -> str:
    a, b = LIMBS[limb]
    return f"{KEYPOINTS[a]}-{KEYPOINTS[b]}"
