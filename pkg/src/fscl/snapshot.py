"""FSCL1 binary snapshot format.

A record is ``b"FSCL"``, a version byte ``0x01``, then little-endian
``u64 N, f64 L, f64 time, f64 alpha, f64 epsilon`` followed by ``N`` f64
cell values.  Trajectory files are plain concatenations of records.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import Field, make_grid

MAGIC = b"FSCL"
VERSION = 1
_HEADER = struct.Struct("<4sBQdddd")


@dataclass
class SnapshotRecord:
    field: Field
    alpha: float
    epsilon: float


def encode_snapshot(f: Field, alpha: float, epsilon: float) -> bytes:
    head = _HEADER.pack(MAGIC, VERSION, f.grid.N, f.grid.L, f.time, alpha, epsilon)
    return head + np.asarray(f.values, dtype="<f8").tobytes()


def decode_snapshots(data: bytes) -> list[SnapshotRecord]:
    records = []
    pos = 0
    while pos < len(data):
        if len(data) - pos < _HEADER.size:
            raise ValueError("truncated FSCL header")
        magic, version, n, L, t, alpha, eps = _HEADER.unpack_from(data, pos)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r} at offset {pos}")
        if version != VERSION:
            raise ValueError(f"unsupported FSCL version {version}")
        pos += _HEADER.size
        nbytes = 8 * n
        if len(data) - pos < nbytes:
            raise ValueError("truncated FSCL payload")
        values = np.frombuffer(data, dtype="<f8", count=n, offset=pos).astype(float)
        pos += nbytes
        records.append(SnapshotRecord(Field(make_grid(L, n), values, t), alpha, eps))
    return records


def write_snapshots(path, fields, alpha: float, epsilon: float) -> None:
    blob = b"".join(encode_snapshot(f, alpha, epsilon) for f in fields)
    Path(path).write_bytes(blob)


def read_snapshots(path) -> list[SnapshotRecord]:
    return decode_snapshots(Path(path).read_bytes())


def write_path_array(path, grid, times, states, alpha, epsilon) -> None:
    """Write a (steps, N) state array as consecutive records."""
    with open(path, "wb") as fh:
        for t, row in zip(times, states):
            fh.write(_HEADER.pack(MAGIC, VERSION, grid.N, grid.L, float(t), alpha, epsilon))
            fh.write(np.asarray(row, dtype="<f8").tobytes())
