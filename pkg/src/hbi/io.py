"""Matrix files and CSV map exports.

Binary matrix layout (little-endian)::

    offset 0   4 bytes  magic b"HBIM"
    offset 4   u32      version (1)
    offset 8   u32      rows
    offset 12  u32      cols
    offset 16  f32[rows * cols], row-major
"""

from __future__ import annotations

import os
import struct

import numpy as np

from .errors import MatrixFileError, NonFiniteInput

__all__ = ["MAGIC", "VERSION", "write_matrix", "read_matrix", "write_csv", "read_csv"]

MAGIC = b"HBIM"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def write_matrix(path: str | os.PathLike, matrix) -> None:
    m = np.asarray(matrix)
    if m.ndim == 1:
        m = m[None, :]
    if m.ndim != 2:
        raise MatrixFileError(f"can only store 2-D matrices, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteInput(f"NonFiniteInput: refusing to write non-finite values to {path}")
    rows, cols = m.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, rows, cols))
        fh.write(np.ascontiguousarray(m, dtype="<f4").tobytes())


def read_matrix(path: str | os.PathLike) -> np.ndarray:
    """Load a matrix file as a float32 array of shape ``(rows, cols)``."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise MatrixFileError(f"cannot read matrix file {path}: {exc.strerror}") from exc
    if len(blob) < _HEADER.size:
        raise MatrixFileError(f"{path}: truncated header")
    magic, version, rows, cols = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise MatrixFileError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise MatrixFileError(f"{path}: unsupported version {version}")
    expected = _HEADER.size + 4 * rows * cols
    if len(blob) != expected:
        raise MatrixFileError(f"{path}: expected {expected} bytes, found {len(blob)}")
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size).reshape(rows, cols)
    if not np.all(np.isfinite(data)):
        raise NonFiniteInput(f"NonFiniteInput: {path} contains non-finite values")
    return data.astype(np.float32)


def write_csv(path: str | os.PathLike, matrix) -> None:
    """Comma-separated values, 9 significant digits, LF line endings."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [",".join(format(float(v), ".9g") for v in row) for row in m]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_csv(path: str | os.PathLike) -> np.ndarray:
    with open(path, encoding="utf-8") as fh:
        rows = [line.split(",") for line in fh.read().splitlines() if line]
    return np.array(rows, dtype=float)
