"""Flat named-tensor container for model checkpoints and dataset shards.

Layout (all integers little-endian):

    8 bytes   magic "NIRGNN01"
    u64       entry count
    per entry, sorted by name:
        u32       name byte length
        bytes     name, UTF-8
        u32       rank
        u64 * r   dimension sizes
        f64 * n   row-major values

Sorting entries by name makes the bytes a pure function of the stored
mapping, which is what the byte-identical-run guarantees rest on.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import IngestionError
from .tensor import Tensor

MAGIC = b"NIRGNN01"


def _as_array(value) -> np.ndarray:
    if isinstance(value, Tensor):
        return value.data
    return np.asarray(value, dtype=np.float64)


def save_tensors(path: str | Path, tensors: Mapping[str, "Tensor | np.ndarray"]) -> None:
    """Write a name→tensor mapping; values are coerced to float64."""
    entries = sorted(tensors.items())
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<Q", len(entries))
    for name, value in entries:
        arr = np.ascontiguousarray(_as_array(value), dtype=np.float64)
        name_bytes = name.encode("utf-8")
        buf += struct.pack("<I", len(name_bytes))
        buf += name_bytes
        buf += struct.pack("<I", arr.ndim)
        buf += struct.pack(f"<{arr.ndim}Q", *arr.shape)
        buf += arr.astype("<f8").tobytes(order="C")
    Path(path).write_bytes(bytes(buf))


def load_tensors(path: str | Path) -> dict[str, np.ndarray]:
    """Read a container written by :func:`save_tensors`."""
    raw = Path(path).read_bytes()
    if len(raw) < len(MAGIC) + 8 or raw[: len(MAGIC)] != MAGIC:
        raise IngestionError(f"{path}: not a named-tensor container (bad magic)")
    pos = len(MAGIC)
    (count,) = struct.unpack_from("<Q", raw, pos)
    pos += 8
    out: dict[str, np.ndarray] = {}
    try:
        for _ in range(count):
            (name_len,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            name = raw[pos : pos + name_len].decode("utf-8")
            pos += name_len
            (rank,) = struct.unpack_from("<I", raw, pos)
            pos += 4
            shape = struct.unpack_from(f"<{rank}Q", raw, pos)
            pos += 8 * rank
            n = int(np.prod(shape, dtype=np.int64)) if rank else 1
            values = np.frombuffer(raw, dtype="<f8", count=n, offset=pos)
            pos += 8 * n
            out[name] = values.reshape(shape).astype(np.float64)
    except (struct.error, ValueError) as e:
        raise IngestionError(f"{path}: truncated or corrupt container ({e})") from e
    if pos != len(raw):
        raise IngestionError(f"{path}: {len(raw) - pos} trailing bytes after last entry")
    return out
