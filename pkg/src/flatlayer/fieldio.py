"""On-disk formats for complex fields: binary dumps and per-slice CSV export.

Binary layout: magic "LAF1", three little-endian u32 (N, N, Mz), six
little-endian f64 bounds (x_min, x_max, y_min, y_max, z_min, z_max), then
the samples as little-endian f64 pairs (re, im) with iz slowest and ix
fastest. The format is self-describing enough to rebuild the uniform grid.
"""

from __future__ import annotations

import csv
import struct
from pathlib import Path

import numpy as np

from .fields import ComplexField, Grid3D

MAGIC = b"LAF1"
_HEADER = struct.Struct("<4sIII6d")


def write_field(field: ComplexField, path: str | Path) -> None:
    """Write a complex field to the binary dump format."""
    g = field.grid
    header = _HEADER.pack(
        MAGIC,
        g.nx,
        g.ny,
        g.nz,
        g.x_min,
        g.x_max,
        g.y_min,
        g.y_max,
        float(g.z_nodes[0]),
        float(g.z_nodes[-1]),
    )
    # iz-major, then iy, then ix: (nx, ny, nz) -> (nz, ny, nx)
    ordered = np.ascontiguousarray(field.values.transpose(2, 1, 0))
    interleaved = np.empty(ordered.size * 2, dtype="<f8")
    interleaved[0::2] = ordered.real.ravel()
    interleaved[1::2] = ordered.imag.ravel()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(interleaved.tobytes())


def read_field(path: str | Path) -> ComplexField:
    """Read a binary field dump, rebuilding its uniform grid."""
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, nx, ny, nz, x0, x1, y0, y1, z0, z1 = _HEADER.unpack(raw)
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != 2 * nx * ny * nz:
        raise ValueError(f"{path}: expected {2 * nx * ny * nz} samples, got {data.size}")
    values = (data[0::2] + 1j * data[1::2]).reshape(nz, ny, nx).transpose(2, 1, 0)
    grid = Grid3D(
        x_min=x0, x_max=x1, y_min=y0, y_max=y1,
        nx=nx, ny=ny, z_nodes=np.linspace(z0, z1, nz),
    )
    return ComplexField(grid, values)


def export_slices_csv(field: ComplexField, directory: str | Path, stem: str) -> list[Path]:
    """Write one CSV per z-slice with columns x, y, re, im."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    g = field.grid
    x = g.x_coords()
    y = g.y_coords()
    paths = []
    for iz, z in enumerate(g.z_nodes):
        path = directory / f"{stem}_z{iz:03d}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x", "y", "re", "im"])
            for ix in range(g.nx):
                for iy in range(g.ny):
                    v = field.values[ix, iy, iz]
                    writer.writerow(
                        [repr(float(x[ix])), repr(float(y[iy])),
                         repr(float(v.real)), repr(float(v.imag))]
                    )
        paths.append(path)
    return paths
