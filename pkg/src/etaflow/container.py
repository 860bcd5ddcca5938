"""Binary container for grid functions and differential forms.

Layout (little endian throughout):

    magic   4 bytes   b"GFN1" or b"DFM1"
    header  struct    grid rank d, dims[d], matrix dim m, smooth flag
    payload           row-major complex128 samples

A differential form is stored as a counted sequence of (multi-index,
grid-function) records; the path index is stored as -1.  The format is
deliberately dumb: it exists for caching and offline inspection, not
interchange.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .fields import DifferentialForm, GridFunction

__all__ = [
    "save_grid_function",
    "load_grid_function",
    "save_form",
    "load_form",
]

_GFN_MAGIC = b"GFN1"
_DFM_MAGIC = b"DFM1"


def _write_grid_function(fh: BinaryIO, g: GridFunction) -> None:
    fh.write(struct.pack("<i", len(g.dims)))
    fh.write(struct.pack(f"<{len(g.dims)}i", *g.dims))
    fh.write(struct.pack("<i?d", g.matrix_dim, g.smooth, g.tail_fraction))
    data = np.ascontiguousarray(g.values, dtype=np.complex128)
    fh.write(data.tobytes())


def _read_grid_function(fh: BinaryIO) -> GridFunction:
    (d,) = struct.unpack("<i", fh.read(4))
    dims = struct.unpack(f"<{d}i", fh.read(4 * d))
    m, smooth, tail = struct.unpack("<i?d", fh.read(13))
    count = int(np.prod(dims)) * m * m
    raw = fh.read(16 * count)
    values = np.frombuffer(raw, dtype=np.complex128).reshape(dims + (m, m)).copy()
    return GridFunction(tuple(dims), m, values, smooth, tail)


def save_grid_function(path: str | Path, g: GridFunction) -> None:
    with open(path, "wb") as fh:
        fh.write(_GFN_MAGIC)
        _write_grid_function(fh, g)


def load_grid_function(path: str | Path) -> GridFunction:
    with open(path, "rb") as fh:
        if fh.read(4) != _GFN_MAGIC:
            raise ValueError(f"{path} is not a grid-function container")
        return _read_grid_function(fh)


def save_form(path: str | Path, omega: DifferentialForm) -> None:
    with open(path, "wb") as fh:
        fh.write(_DFM_MAGIC)
        fh.write(struct.pack("<i", len(omega.dims)))
        fh.write(struct.pack(f"<{len(omega.dims)}i", *omega.dims))
        fh.write(struct.pack("<i", len(omega.coeffs)))
        for idx in sorted(omega.coeffs):
            fh.write(struct.pack("<i", len(idx)))
            if idx:
                fh.write(struct.pack(f"<{len(idx)}i", *idx))
            _write_grid_function(fh, omega.coeffs[idx])


def load_form(path: str | Path) -> DifferentialForm:
    with open(path, "rb") as fh:
        if fh.read(4) != _DFM_MAGIC:
            raise ValueError(f"{path} is not a differential-form container")
        (d,) = struct.unpack("<i", fh.read(4))
        dims = struct.unpack(f"<{d}i", fh.read(4 * d))
        (n_comp,) = struct.unpack("<i", fh.read(4))
        coeffs = {}
        m = 1
        for _ in range(n_comp):
            (k,) = struct.unpack("<i", fh.read(4))
            idx = struct.unpack(f"<{k}i", fh.read(4 * k)) if k else ()
            g = _read_grid_function(fh)
            coeffs[tuple(idx)] = g
            m = max(m, g.matrix_dim)
        return DifferentialForm(tuple(dims), m, coeffs)
