"""Flat binary and CSV layouts for grid fields.

Both layouts start with the header ``(n, N)`` followed by the values in
row-major (C) order over the grid axes.  Matrix fields store the ``n^2``
complex entries of each point as interleaved ``(re, im)`` pairs, so a point
contributes ``2 n^2`` numbers; a scalar field contributes one.

Binary: two little-endian ``int32`` then little-endian ``float64`` values.
The kind (scalar or matrix) follows from the payload length.
CSV: a ``n,N`` header row, the two integers, then one row per grid point.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .errors import ParseError
from .grid import TorusGrid

_HEADER = np.dtype("<i4")
_VALUE = np.dtype("<f8")


def _flatten(grid: TorusGrid, f) -> np.ndarray:
    f = np.asarray(f)
    if f.shape == grid.shape:
        return np.ascontiguousarray(f, dtype=float).reshape(grid.size, 1)
    if f.shape == grid.shape + (grid.n, grid.n):
        c = np.ascontiguousarray(f, dtype=complex).reshape(grid.size, grid.n * grid.n)
        return c.view(float).reshape(grid.size, 2 * grid.n * grid.n)
    raise ValueError(f"field of shape {f.shape} does not live on {grid}")


def _unflatten(grid: TorusGrid, values: np.ndarray):
    per_point = values.size // grid.size
    if values.size != per_point * grid.size or per_point not in (1, 2 * grid.n * grid.n):
        raise ParseError(f"{values.size} values do not fit a field on n={grid.n}, N={grid.N}")
    if per_point == 1:
        return values.reshape(grid.shape)
    c = np.ascontiguousarray(values, dtype=float).view(complex)
    return c.reshape(grid.shape + (grid.n, grid.n))


def to_bytes(grid: TorusGrid, f) -> bytes:
    return (np.array([grid.n, grid.N], dtype=_HEADER).tobytes()
            + _flatten(grid, f).astype(_VALUE).tobytes())


def from_bytes(data: bytes):
    """Return ``(grid, field)``."""
    if len(data) < 8:
        raise ParseError("binary field shorter than its header")
    n, N = (int(v) for v in np.frombuffer(data[:8], dtype=_HEADER))
    grid = TorusGrid(n, N)
    return grid, _unflatten(grid, np.frombuffer(data[8:], dtype=_VALUE).astype(float))


def to_csv(grid: TorusGrid, f) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "N"])
    w.writerow([grid.n, grid.N])
    for row in _flatten(grid, f):
        w.writerow(["%.17g" % v for v in row])
    return buf.getvalue()


def from_csv(text: str):
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2 or [c.strip() for c in rows[0]] != ["n", "N"]:
        raise ParseError("CSV field must start with an 'n,N' header", line=1)
    try:
        n, N = (int(c) for c in rows[1])
    except ValueError as exc:
        raise ParseError(f"bad grid header: {exc}", line=2) from None
    grid = TorusGrid(n, N)
    try:
        values = np.array([[float(c) for c in r] for r in rows[2:]], dtype=float)
    except ValueError as exc:
        raise ParseError(f"bad value: {exc}") from None
    return grid, _unflatten(grid, values.ravel())


def save(path, grid: TorusGrid, f) -> None:
    """Write ``f`` as CSV when ``path`` ends in ``.csv``, binary otherwise."""
    path = Path(path)
    if path.suffix == ".csv":
        path.write_text(to_csv(grid, f))
    else:
        path.write_bytes(to_bytes(grid, f))


def load(path):
    path = Path(path)
    if path.suffix == ".csv":
        return from_csv(path.read_text())
    return from_bytes(path.read_bytes())
