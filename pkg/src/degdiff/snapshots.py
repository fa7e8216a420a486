"""Binary snapshot files: "DDIF" magic, version, grid shape, time, payload."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grid import Grid2D, ScalarField

MAGIC = b"DDIF"
VERSION = 1
_HEADER = struct.Struct("<4sHIId")  # magic, version u16, nx u32, ny u32, t f64


class SnapshotFormatError(ValueError):
    pass


def write_snapshot(path, fld: ScalarField, t: float) -> None:
    data = np.ascontiguousarray(fld.data, dtype="<f8")
    header = _HEADER.pack(MAGIC, VERSION, fld.grid.nx, fld.grid.ny, float(t))
    Path(path).write_bytes(header + data.tobytes())


def read_snapshot(path, grid: Grid2D | None = None) -> tuple[ScalarField, float]:
    """Read a snapshot; if grid is None a unit-spaced grid of matching shape
    on (-1,1)^2 is synthesized."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise SnapshotFormatError("file too short for header")
    magic, version, nx, ny, t = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise SnapshotFormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise SnapshotFormatError(f"unsupported version {version}")
    expected = _HEADER.size + 8 * nx * ny
    if len(raw) != expected:
        raise SnapshotFormatError(
            f"payload length mismatch: {len(raw)} != {expected}"
        )
    data = np.frombuffer(raw[_HEADER.size:], dtype="<f8").reshape(ny, nx).copy()
    if grid is None:
        grid = Grid2D(-1.0, 1.0, -1.0, 1.0, nx, ny)
    elif (grid.nx, grid.ny) != (nx, ny):
        raise SnapshotFormatError("snapshot shape does not match supplied grid")
    return ScalarField(grid, data), float(t)
