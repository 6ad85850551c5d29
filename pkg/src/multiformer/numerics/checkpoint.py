"""Binary checkpoint files.

Layout (little endian)::

    b"MFCK" | version u16 | records...
    record = name_len u32 | name utf-8 | rank u32 | dims u64*rank | dtype u8 | raw elements

dtype tag 0 is float32, 1 is float64.
"""

from __future__ import annotations

import os
import struct
from typing import Mapping

import numpy as np

MAGIC = b"MFCK"
VERSION = 1
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_TAGS = {np.dtype("float32"): 0, np.dtype("float64"): 1}


class CheckpointError(Exception):
    """Malformed or unreadable checkpoint."""


class VersionMismatchError(CheckpointError):
    pass


def save_checkpoint(path, tensors: Mapping[str, np.ndarray], version: int = VERSION) -> None:
    chunks = [MAGIC, struct.pack("<H", version)]
    for name, value in tensors.items():
        arr = np.asarray(value)
        if arr.dtype not in _TAGS:
            arr = arr.astype(np.float64)
        raw_name = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        tag = _TAGS[arr.dtype]
        chunks.append(struct.pack("<B", tag))
        chunks.append(np.ascontiguousarray(arr, dtype=_DTYPES[tag]).tobytes())
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(b"".join(chunks))
    os.replace(tmp, path)


def load_checkpoint(path, expected_version: int = VERSION) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    if len(blob) < 6:
        raise CheckpointError(f"{path}: truncated header")
    (version,) = struct.unpack_from("<H", blob, 4)
    if version != expected_version:
        raise VersionMismatchError(f"{path}: checkpoint version {version}, expected {expected_version}")
    out: dict[str, np.ndarray] = {}
    pos = 6
    try:
        while pos < len(blob):
            (n,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            name = blob[pos : pos + n].decode("utf-8")
            if len(name.encode("utf-8")) != n:
                raise CheckpointError(f"{path}: truncated record name")
            pos += n
            (rank,) = struct.unpack_from("<I", blob, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}Q", blob, pos)
            pos += 8 * rank
            (tag,) = struct.unpack_from("<B", blob, pos)
            pos += 1
            if tag not in _DTYPES:
                raise CheckpointError(f"{path}: unknown dtype tag {tag} in record '{name}'")
            dtype = _DTYPES[tag]
            count = int(np.prod(dims, dtype=np.int64)) if rank else 1
            nbytes = count * dtype.itemsize
            if pos + nbytes > len(blob):
                raise CheckpointError(f"{path}: truncated data in record '{name}'")
            out[name] = np.frombuffer(blob, dtype=dtype, count=count, offset=pos).reshape(dims).astype(dtype.newbyteorder("="))
            pos += nbytes
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated record ({exc})") from None
    return out
