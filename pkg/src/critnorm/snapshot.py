"""CNF1 binary snapshot files.

Layout (little-endian)::

    b"CNF1" | u32 n1 n2 n3 | f64 L1 L2 L3 | f64 time | u32 ncomp | ncomp x complex128[n1, n2, n3]

Coefficient arrays are written in C row-major order, ``fftfreq`` order per axis.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ShapeError, ValidationError
from .spectral_core import Grid, SpectralField, VelocityState

MAGIC = b"CNF1"
_HEADER = struct.Struct("<4s3I3dd I")


@dataclass(frozen=True)
class Snapshot:
    grid: Grid
    time: float
    fields: tuple[SpectralField, ...]

    def velocity(self) -> VelocityState:
        if len(self.fields) != 3:
            raise ShapeError(f"velocity snapshot needs 3 components, file has {len(self.fields)}")
        return VelocityState(*self.fields, time=self.time)


def encode_snapshot(fields: Sequence[SpectralField], time: float) -> bytes:
    if not fields:
        raise ShapeError("snapshot needs at least one component")
    g = fields[0].grid
    if any(f.grid != g for f in fields):
        raise ShapeError("snapshot components live on different grids")
    header = _HEADER.pack(MAGIC, *g.n, *g.L, float(time), len(fields))
    body = b"".join(np.ascontiguousarray(f.coeffs, dtype="<c16").tobytes() for f in fields)
    return header + body


def write_snapshot(path: str | Path, fields: Sequence[SpectralField] | VelocityState, time: float | None = None) -> Path:
    if isinstance(fields, VelocityState):
        time = fields.time if time is None else time
        fields = fields.components
    data = encode_snapshot(list(fields), 0.0 if time is None else time)
    path = Path(path)
    path.write_bytes(data)
    return path


def decode_snapshot(data: bytes) -> Snapshot:
    if len(data) < _HEADER.size:
        raise ValidationError("snapshot file is truncated")
    magic, n1, n2, n3, L1, L2, L3, time, ncomp = _HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise ValidationError(f"bad snapshot magic {magic!r}")
    grid = Grid((n1, n2, n3), (L1, L2, L3))
    count = n1 * n2 * n3
    expected = _HEADER.size + ncomp * count * 16
    if len(data) != expected:
        raise ValidationError(f"snapshot payload has {len(data)} bytes, expected {expected}")
    fields = []
    for i in range(ncomp):
        arr = np.frombuffer(data, dtype="<c16", count=count, offset=_HEADER.size + i * count * 16)
        fields.append(SpectralField(grid, arr.reshape(grid.shape).astype(np.complex128)))
    return Snapshot(grid, float(time), tuple(fields))


def read_snapshot(path: str | Path) -> Snapshot:
    return decode_snapshot(Path(path).read_bytes())
