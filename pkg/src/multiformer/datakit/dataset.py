"""Synthetic datasets on disk: CSI files, annotation JSON and a manifest.

Layout::

    dir/manifest.json      {version, seed, config, samples: [{csi, ann, split}]}
    dir/csi/00000.csit     CSI binary (see frontend.csi)
    dir/ann/00000.json     {persons: [{kp: [{x, y} | null] * 18}], frame, scene}
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..decoder.topology import N_KEYPOINTS
from ..frontend.csi import CsiFormatError, CsiWindow, read_csi, tokenize_window, write_csi
from .labels import render_labels
from .scene import SceneConfig, make_sample

DATASET_VERSION = 1
SPLITS = ("train", "val")


class DatasetError(Exception):
    """Missing, unreadable or inconsistent dataset file; the message names the path."""


class DatasetVersionError(DatasetError):
    pass


@dataclass
class Annotation:
    persons: list  # (18, 2) normalized keypoints per person, NaN rows for absent keypoints
    frame: int = 0
    scene: int = 0

    def __post_init__(self):
        self.persons = [np.asarray(p, dtype=np.float64).reshape(N_KEYPOINTS, 2) for p in self.persons]
        for p in self.persons:
            ok = p[~np.isnan(p)]
            if ok.size and (ok.min() < 0.0 or ok.max() > 1.0):
                raise ValueError("annotation coordinates must lie in [0, 1]")

    def to_dict(self) -> dict:
        people = []
        for p in self.persons:
            kp = [None if np.isnan(row).any() else {"x": float(row[0]), "y": float(row[1])} for row in p]
            people.append({"kp": kp})
        return {"persons": people, "frame": int(self.frame), "scene": int(self.scene)}

    @classmethod
    def from_dict(cls, d: dict) -> "Annotation":
        persons = []
        for pd in d["persons"]:
            kp = pd["kp"]
            if len(kp) != N_KEYPOINTS:
                raise ValueError(f"expected {N_KEYPOINTS} keypoints per person, got {len(kp)}")
            persons.append(np.array([[np.nan, np.nan] if e is None else [e["x"], e["y"]] for e in kp], dtype=np.float64))
        return cls(persons, int(d.get("frame", 0)), int(d.get("scene", 0)))


def write_annotation(path, ann: Annotation) -> None:
    _write_text(path, json.dumps(ann.to_dict()))


def read_annotation(path) -> Annotation:
    try:
        return Annotation.from_dict(_read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"{path}: malformed annotation ({exc})") from exc


@dataclass
class Sample:
    window: CsiWindow
    ann: Annotation
    split: str = "train"


@dataclass
class Dataset:
    samples: list = field(default_factory=list)
    seed: int | None = None
    config: dict = field(default_factory=dict)
    version: int = DATASET_VERSION

    def __len__(self) -> int:
        return len(self.samples)

    def split(self, name: str | None) -> list[Sample]:
        if name in (None, "all"):
            return list(self.samples)
        return [s for s in self.samples if s.split == name]

    def subset(self, name: str | None) -> "Dataset":
        return Dataset(self.split(name), self.seed, dict(self.config), self.version)


def generate_dataset(
    n: int,
    seed: int,
    scene: SceneConfig | None = None,
    val_fraction: float = 0.2,
    max_persons: int = 2,
    persons: int | None = None,
) -> Dataset:
    """``n`` samples with ``persons`` people each (random in 1..max_persons when None).

    A seeded shuffle picks the validation split.
    """
    scene = scene or SceneConfig()
    if not 0.0 <= val_fraction < 1.0:
        raise ValueError(f"val_fraction must be in [0, 1), got {val_fraction}")
    children = np.random.SeedSequence(seed).spawn(n + 1)
    samples = []
    for i in range(n):
        rng = np.random.default_rng(children[i])
        k = persons if persons is not None else int(rng.integers(1, max_persons + 1))
        cfg = SceneConfig(**{**scene.to_dict(), "n_persons": k})
        s = make_sample(rng, cfg, scene_id=i)
        samples.append(Sample(s.window, Annotation(s.persons, s.frame, s.scene)))
    n_val = int(round(val_fraction * n))
    for idx in np.random.default_rng(children[n]).permutation(n)[:n_val]:
        samples[idx].split = "val"
    config = {**scene.to_dict(), "max_persons": max_persons, "persons": persons, "val_fraction": val_fraction}
    return Dataset(samples, seed, config)


def write_dataset(dataset: Dataset, directory) -> Path:
    root = Path(directory)
    (root / "csi").mkdir(parents=True, exist_ok=True)
    (root / "ann").mkdir(parents=True, exist_ok=True)
    records = []
    for i, s in enumerate(dataset.samples):
        if s.split not in SPLITS:
            raise ValueError(f"unknown split {s.split!r}")
        csi_rel, ann_rel = f"csi/{i:05d}.csit", f"ann/{i:05d}.json"
        write_csi(root / csi_rel, s.window)
        write_annotation(root / ann_rel, s.ann)
        records.append({"csi": csi_rel, "ann": ann_rel, "split": s.split})
    manifest = {"version": dataset.version, "seed": dataset.seed, "config": dataset.config, "samples": records}
    _write_text(root / "manifest.json", json.dumps(manifest, indent=1, sort_keys=True))
    return root


def read_dataset(directory) -> Dataset:
    root = Path(directory)
    path = root / "manifest.json"
    manifest = _read_json(path)
    try:
        version = manifest["version"]
        records = manifest["samples"]
    except (KeyError, TypeError) as exc:
        raise DatasetError(f"{path}: missing field {exc}") from exc
    if version != DATASET_VERSION:
        raise DatasetVersionError(f"{path}: dataset version {version} is not supported (expected {DATASET_VERSION})")
    samples = []
    for rec in records:
        try:
            csi_path, ann_path, split = root / rec["csi"], root / rec["ann"], rec["split"]
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"{path}: malformed sample record {rec!r}") from exc
        if split not in SPLITS:
            raise DatasetError(f"{path}: unknown split {split!r}")
        try:
            window = read_csi(csi_path)
        except CsiFormatError as exc:
            raise DatasetError(str(exc)) from exc
        samples.append(Sample(window, read_annotation(ann_path), split))
    return Dataset(samples, manifest.get("seed"), manifest.get("config", {}), version)


def _read_json(path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DatasetError(f"{path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path}: invalid JSON ({exc.msg} at line {exc.lineno})") from exc


def _write_text(path, text: str) -> None:
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


@dataclass
class ArrayBatch:
    freq: np.ndarray  # (N, N_S, M*links)
    temp: np.ndarray  # (N, M, N_S*links)
    pcm: np.ndarray  # (N, 19, S, S)
    paf: np.ndarray  # (N, 38, S, S)
    anns: list

    def __len__(self) -> int:
        return len(self.anns)

    def take(self, idx) -> "ArrayBatch":
        idx = np.asarray(idx)
        return ArrayBatch(self.freq[idx], self.temp[idx], self.pcm[idx], self.paf[idx], [self.anns[i] for i in idx])


def to_arrays(samples, packets: int, subcarriers: int, side: int, sigma: float = 1.5, width: float = 1.0, dtype=np.float32) -> ArrayBatch:
    """Tokenize every window and render its labels on the side x side grid."""
    if not samples:
        raise DatasetError("no samples to convert")
    freq, temp, pcm, paf = [], [], [], []
    for s in samples:
        f, t = tokenize_window(s.window, packets, subcarriers)
        p, a = render_labels(s.ann.persons, side, sigma, width)
        freq.append(f)
        temp.append(t)
        pcm.append(p)
        paf.append(a)
    return ArrayBatch(
        np.stack(freq).astype(dtype),
        np.stack(temp).astype(dtype),
        np.stack(pcm).astype(dtype),
        np.stack(paf).astype(dtype),
        [s.ann for s in samples],
    )
