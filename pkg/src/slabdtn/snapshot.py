"""Binary field snapshots.

Layout (little-endian): the 5 bytes ``SLAB1``; n, N, M as uint32; a, L,
gamma_mesh as float64; lateral boundary condition as one byte (0 dirichlet,
1 periodic); the M + 1 vertical levels as float64; then the field values as
float64 with the vertical level slowest and the last lateral axis fastest.
"""

from __future__ import annotations

import struct

import numpy as np

from .grid import DIRICHLET, PERIODIC, ExtensionField, SlabGrid

MAGIC = b"SLAB1"
_HEADER = struct.Struct("<5s3I3dB")
_BC_CODES = {DIRICHLET: 0, PERIODIC: 1}


def encode(field: ExtensionField) -> bytes:
    g = field.grid
    head = _HEADER.pack(MAGIC, g.n, g.N, g.M, g.a, g.L, g.gamma_mesh, _BC_CODES[g.lateral_bc])
    return head + np.asarray(g.y, "<f8").tobytes() + np.ascontiguousarray(field.values, "<f8").tobytes()


def decode(data: bytes) -> ExtensionField:
    if len(data) < _HEADER.size or data[:5] != MAGIC:
        raise ValueError("not a SLAB1 snapshot")
    magic, n, N, M, a, L, gamma_mesh, bc = _HEADER.unpack_from(data)
    bcs = {v: k for k, v in _BC_CODES.items()}
    if bc not in bcs:
        raise ValueError(f"unknown lateral boundary code {bc}")
    count = (M + 1) * (1 + N ** n)
    expected = _HEADER.size + 8 * count
    if len(data) != expected:
        raise ValueError(f"snapshot has {len(data)} bytes, expected {expected}")
    body = np.frombuffer(data, "<f8", offset=_HEADER.size)
    y = body[:M + 1].astype(float)
    grid = SlabGrid(int(n), float(L), int(N), y, float(a), bcs[bc], float(gamma_mesh))
    values = body[M + 1:].astype(float).reshape(grid.shape)
    return ExtensionField(grid, values)


def write_snapshot(path, field: ExtensionField):
    with open(path, "wb") as fh:
        fh.write(encode(field))


def read_snapshot(path) -> ExtensionField:
    with open(path, "rb") as fh:
        return decode(fh.read())
