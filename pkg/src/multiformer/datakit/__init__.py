"""Synthetic scenes, label rendering and dataset persistence."""

from .dataset import (
    DATASET_VERSION,
    Annotation,
    ArrayBatch,
    Dataset,
    DatasetError,
    DatasetVersionError,
    Sample,
    generate_dataset,
    read_annotation,
    read_dataset,
    to_arrays,
    write_annotation,
    write_dataset,
)
from .labels import render_labels, render_paf, render_pcm, segment_distance
from .scene import SceneConfig, SceneSample, make_sample, room_positions, synth_csi
from .skeleton import build_pose, random_angles, random_motion, random_scene

__all__ = [
    "DATASET_VERSION",
    "Annotation",
    "ArrayBatch",
    "Dataset",
    "DatasetError",
    "DatasetVersionError",
    "Sample",
    "SceneConfig",
    "SceneSample",
    "build_pose",
    "generate_dataset",
    "make_sample",
    "random_angles",
    "random_motion",
    "random_scene",
    "read_annotation",
    "read_dataset",
    "render_labels",
    "render_paf",
    "render_pcm",
    "room_positions",
    "segment_distance",
    "synth_csi",
    "to_arrays",
    "write_annotation",
    "write_dataset",
]
