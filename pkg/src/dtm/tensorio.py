"""Binary tensor container.

Layout (all integers little-endian): magic ``DTMT`` (4 bytes), version
u32 = 1, dtype u32 (1 = 32-bit float), ndim u32, then ndim u64 dims, then
the row-major float32 payload. Round trips are bit-exact; reads validate
the header before touching the payload and reject non-finite values.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import (
    BadMagicError,
    BadVersionError,
    NonFiniteError,
    TruncatedPayloadError,
    UnsupportedDtypeError,
)

MAGIC = b"DTMT"
VERSION = 1
DTYPE_FLOAT32 = 1

_HEADER = struct.Struct("<4sIII")


def write_tensor(path, array) -> None:
    """Write a float32 tensor file; float64 input is rounded to 32-bit."""
    arr = np.ascontiguousarray(array, dtype=np.float32)
    if not np.isfinite(arr).all():
        flat = int(np.flatnonzero(~np.isfinite(arr.reshape(-1)))[0])
        raise NonFiniteError(flat)
    header = _HEADER.pack(MAGIC, VERSION, DTYPE_FLOAT32, arr.ndim)
    dims = struct.pack(f"<{arr.ndim}Q", *arr.shape)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(dims)
        fh.write(arr.astype("<f4").tobytes())


def read_tensor(path) -> np.ndarray:
    """Read and validate a tensor file; returns a float32 array."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise TruncatedPayloadError(f"file is {len(blob)} bytes, header needs {_HEADER.size}")
    magic, version, dtype, ndim = _HEADER.unpack_from(blob, 0)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if version != VERSION:
        raise BadVersionError(f"unsupported version {version}")
    if dtype != DTYPE_FLOAT32:
        raise UnsupportedDtypeError(f"unsupported dtype code {dtype}")
    dims_end = _HEADER.size + 8 * ndim
    if len(blob) < dims_end:
        raise TruncatedPayloadError("file ends inside the dims block")
    dims = struct.unpack_from(f"<{ndim}Q", blob, _HEADER.size)
    expected = 4
    for d in dims:
        expected *= d
    if len(blob) - dims_end != expected:
        raise TruncatedPayloadError(
            f"payload holds {len(blob) - dims_end} bytes, dims {dims} require {expected}"
        )
    arr = np.frombuffer(blob[dims_end:], dtype="<f4").reshape(dims).astype(np.float32)
    if not np.isfinite(arr).all():
        flat = int(np.flatnonzero(~np.isfinite(arr.reshape(-1)))[0])
        raise NonFiniteError(flat)
    return arr
