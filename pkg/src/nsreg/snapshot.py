"""Binary velocity snapshots ("NSRG" format).

Layout, all little-endian: 4 magic bytes ``NSRG``, format version (u32),
grid size n (u32), simulation time (f64), then the three velocity components
as consecutive f64 arrays of n^3 values, row-major with z fastest.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .spectral import Grid, VectorField

MAGIC = b"NSRG"
VERSION = 1
_HEADER = struct.Struct("<4sIId")


class SnapshotError(ValueError):
    pass


def write_snapshot(path, u: VectorField, time: float) -> None:
    n = u.grid.n
    data = np.ascontiguousarray(u.values, dtype="<f8")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, n, float(time)))
        fh.write(data.tobytes(order="C"))


def read_snapshot(path, dealias_fraction: float = 2.0 / 3.0) -> tuple[VectorField, float]:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SnapshotError(f"{path}: truncated header")
    magic, version, n, time = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 3 * n**3 * 8
    if len(raw) != expected:
        raise SnapshotError(f"{path}: expected {expected} bytes, found {len(raw)}")
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).reshape(3, n, n, n)
    return VectorField(Grid(n, dealias_fraction), values), time
