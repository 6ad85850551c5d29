"""File emitters: PGM (P5) images, heatmap dumps, SVG skeleton overlays, attention maps."""

from __future__ import annotations

import colorsys
import csv
import json
import os
from pathlib import Path

import numpy as np

from .decoder.pose import SkeletonSet
from .decoder.topology import KEYPOINTS, LIMBS, limb_name


class PgmError(ValueError):
    pass


def to_gray(values: np.ndarray) -> tuple[np.ndarray, float, float]:
    """Affine map [min, max] -> [0, 255]; a constant image maps to 0."""
    values = np.asarray(values, dtype=np.float64)
    lo, hi = float(values.min()), float(values.max())
    if hi > lo:
        img = np.rint((values - lo) * (255.0 / (hi - lo)))
    else:
        img = np.zeros_like(values)
    return img.astype(np.uint8), lo, hi


def write_pgm(path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.ndim != 2 or image.dtype != np.uint8:
        raise PgmError(f"PGM needs a 2-D uint8 image, got {image.shape} {image.dtype}")
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(image).tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":
            pos = blob.index(b"\n", pos) + 1
            continue
        end = pos
        while end < len(blob) and not blob[end : end + 1].isspace():
            end += 1
        if end == pos:
            raise PgmError(f"{path}: truncated header")
        fields.append(blob[pos:end])
        pos = end
    if fields[0] != b"P5":
        raise PgmError(f"{path}: not a binary PGM (magic {fields[0]!r})")
    w, h, maxval = (int(f) for f in fields[1:])
    if maxval > 255:
        raise PgmError(f"{path}: 16-bit PGM not supported")
    data = blob[pos + 1 :]
    if len(data) != w * h:
        raise PgmError(f"{path}: expected {w * h} pixel bytes, found {len(data)}")
    return np.frombuffer(data, dtype=np.uint8).reshape(h, w)


def pcm_channel_names() -> list[str]:
    return list(KEYPOINTS) + ["mean"]


def paf_channel_names() -> list[str]:
    names = []
    for k in range(len(LIMBS)):
        names += [f"{limb_name(k)}.x", f"{limb_name(k)}.y"]
    return names


def dump_heatmaps(directory, pcm: np.ndarray, paf: np.ndarray, prefix: str = "") -> Path:
    """One PGM per channel plus ``heatmaps.json`` with the value range and name of each."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for kind, maps, names in (("pcm", pcm, pcm_channel_names()), ("paf", paf, paf_channel_names())):
        for c, name in enumerate(names):
            img, lo, hi = to_gray(maps[c])
            fname = f"{prefix}{kind}_{c:02d}.pgm"
            write_pgm(root / fname, img)
            entries.append({"file": fname, "kind": kind, "channel": c, "name": name, "min": lo, "max": hi})
    sidecar = root / f"{prefix}heatmaps.json"
    sidecar.write_text(json.dumps({"channels": entries}, indent=1), encoding="utf-8")
    return sidecar


def skeleton_svg(skel: SkeletonSet, size: int = 360, background: np.ndarray | None = None) -> str:
    """SVG overlay: one hue per person, limbs as lines, keypoints as dots."""
    scale = size / max(skel.grid_size - 1, 1)
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">']
    parts.append(f'<rect width="{size}" height="{size}" fill="black"/>')
    if background is not None:
        # coarse heatmap backdrop, one rect per cell
        img, _, _ = to_gray(background)
        cell = size / img.shape[0]
        for r in range(img.shape[0]):
            for c in range(img.shape[1]):
                v = int(img[r, c])
                if v:
                    parts.append(f'<rect x="{c * cell:.2f}" y="{r * cell:.2f}" width="{cell:.2f}" height="{cell:.2f}" fill="rgb({v},{v},{v})"/>')
    n = max(len(skel.persons), 1)
    for i, p in enumerate(skel.persons):
        r, g, b = (int(255 * v) for v in colorsys.hsv_to_rgb(i / n, 0.9, 1.0))
        color = f"rgb({r},{g},{b})"
        for ja, jb in LIMBS:
            a, bb = p.keypoints[ja], p.keypoints[jb]
            if np.isnan(a).any() or np.isnan(bb).any():
                continue
            parts.append(
                f'<line x1="{a[0] * scale:.2f}" y1="{a[1] * scale:.2f}" x2="{bb[0] * scale:.2f}" y2="{bb[1] * scale:.2f}" '
                f'stroke="{color}" stroke-width="2"/>'
            )
        for j, (x, y) in enumerate(p.keypoints):
            if not np.isnan(x):
                parts.append(f'<circle cx="{x * scale:.2f}" cy="{y * scale:.2f}" r="3" fill="{color}"><title>{KEYPOINTS[j]}</title></circle>')
    parts.append("</svg>")
    return "\n".join(parts)


def write_svg(path, skel: SkeletonSet, **kw) -> None:
    Path(path).write_text(skeleton_svg(skel, **kw), encoding="utf-8")


def write_attention(out_prefix, matrix: np.ndarray, salience: np.ndarray, token_label: str = "token") -> tuple[Path, Path]:
    """``<prefix>.pgm`` for the attention matrix and ``<prefix>.csv`` with per-token salience."""
    prefix = os.fspath(out_prefix)
    pgm, csv_path = Path(f"{prefix}.pgm"), Path(f"{prefix}.csv")
    pgm.parent.mkdir(parents=True, exist_ok=True)
    write_pgm(pgm, to_gray(matrix)[0])
    with open(csv_path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([token_label, "salience"])
        for i, v in enumerate(salience):
            w.writerow([i, repr(float(v))])
    return pgm, csv_path
