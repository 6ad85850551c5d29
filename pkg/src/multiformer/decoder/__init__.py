"""Peak extraction, PAF limb scoring, per-limb assignment and skeleton assembly."""

from .pose import (
    Candidate,
    DecodeParams,
    Person,
    SkeletonSet,
    assemble,
    decode_poses,
    match_limb,
    nms_peaks,
    paf_score,
    score_matrix,
)
from .topology import KEYPOINTS, LIMBS, N_KEYPOINTS, N_LIMBS, limb_name, paf_channels

__all__ = [
    "Candidate",
    "DecodeParams",
    "KEYPOINTS",
    "LIMBS",
    "N_KEYPOINTS",
    "N_LIMBS",
    "Person",
    "SkeletonSet",
    "assemble",
    "decode_poses",
    "limb_name",
    "match_limb",
    "nms_peaks",
    "paf_channels",
    "paf_score",
    "score_matrix",
]
