"""Minimal PFM (portable float map) reader/writer.

Grayscale ``Pf`` maps only: header ``Pf\\n{cols} {rows}\\n-1.0\\n`` followed
by little-endian float32 rows stored bottom-to-top. NaN values are
rejected on both paths. This is the on-disk contract shared with the
dataset tooling; it is implemented here independently so this package
depends only on the file format.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np


def write_pfm(path: str | Path, values: np.ndarray) -> None:
    arr = np.asarray(values, dtype=np.float32)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D raster, got shape {arr.shape}")
    if np.isnan(arr).any():
        raise ValueError("NaN values are not representable in this format")
    rows, cols = arr.shape
    with open(path, "wb") as fh:
        fh.write(f"Pf\n{cols} {rows}\n-1.0\n".encode("ascii"))
        fh.write(arr[::-1].astype("<f4").tobytes())


def read_pfm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.readline().strip()
        if magic != b"Pf":
            raise ValueError(f"{path}: not a grayscale float map (got {magic!r})")
        try:
            cols, rows = (int(t) for t in fh.readline().split())
            scale = float(fh.readline())
        except ValueError as exc:
            raise ValueError(f"{path}: malformed header") from exc
        if scale >= 0:
            raise ValueError(f"{path}: big-endian data is not supported")
        data = np.frombuffer(fh.read(rows * cols * 4), dtype="<f4")
    if data.size != rows * cols:
        raise ValueError(f"{path}: truncated pixel data")
    arr = data.reshape(rows, cols)[::-1].copy()
    if np.isnan(arr).any():
        raise ValueError(f"{path}: NaN values present")
    return arr
