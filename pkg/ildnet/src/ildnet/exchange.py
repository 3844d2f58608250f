"""The BSMK mask exchange format: the wire contract with the separator.

Header: magic "BSMK", version u16, plane count u16, K u32, M u32, little
endian; then plane-count row-major float32 planes of shape (K, M) with
values in [0, 1].
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC = b"BSMK"
VERSION = 1
_HEADER = struct.Struct("<4sHHII")


class ExchangeError(ValueError):
    pass


def write_planes(planes, path) -> None:
    arrays = [np.asarray(p, dtype=np.float64) for p in planes]
    if not arrays:
        raise ExchangeError("no planes to write")
    if any(a.shape != arrays[0].shape or a.ndim != 2 for a in arrays):
        raise ExchangeError("planes must share one 2-D shape")
    for a in arrays:
        if not np.all(np.isfinite(a)) or a.min() < 0.0 or a.max() > 1.0:
            raise ExchangeError("plane values must be finite and in [0, 1]")
    k, m = arrays[0].shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, VERSION, len(arrays), k, m))
        for a in arrays:
            fh.write(np.ascontiguousarray(a, dtype="<f4").tobytes())


def read_planes(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise ExchangeError(f"{path}: shorter than the header")
    magic, version, n_planes, k, m = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ExchangeError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise ExchangeError(f"{path}: unsupported version {version}")
    want = n_planes * k * m * 4
    if len(blob) - _HEADER.size != want:
        raise ExchangeError(f"{path}: payload size mismatch")
    data = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    return data.reshape(n_planes, k, m).astype(np.float64)


def validate_file(path) -> tuple:
    """Full validation pass; returns (n_planes, K, M)."""
    planes = read_planes(path)
    if planes.min() < 0.0 or planes.max() > 1.0:
        raise ExchangeError(f"{path}: values outside [0, 1]")
    return planes.shape
