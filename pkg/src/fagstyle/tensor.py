"""Dense real tensors and the TNSR binary interchange format.

Tensors are plain numpy arrays (float64 by default, float32 accepted);
the file format is fixed little-endian so the same bytes parse identically
on any host:

    magic   4 bytes  ASCII "TNSR"
    version u32      = 1
    dtype   u8       1 = f32, 2 = f64
    ndim    u8       1..8
    _       u16      reserved, zero
    dims    ndim*u64
    payload row-major values in the declared dtype

Round trips are bit-exact in both directions; the reader widens nothing
(a file carrying f32 comes back as a float32 array), while every numeric
routine in the package promotes its inputs to float64 on entry.
"""

from __future__ import annotations

import io
import struct
from typing import BinaryIO

import numpy as np

from .errors import FormatError, ValidationError

MAGIC = b"TNSR"
VERSION = 1
MAX_NDIM = 8

_DTYPE_CODES = {np.dtype("float32"): 1, np.dtype("float64"): 2}
_CODE_DTYPES = {1: np.dtype("<f4"), 2: np.dtype("<f8")}

_HEADER = struct.Struct("<4sIBBH")


def validate_tensor(arr, name: str = "tensor") -> np.ndarray:
    """Coerce to a float32/float64 ndarray and enforce ingestion invariants.

    Rejects non-finite values, rank 0 or rank > 8, and zero-length axes.
    Anything that is not already f32 stays/becomes f64.
    """
    a = np.asarray(arr)
    if a.dtype != np.float32:
        a = np.asarray(a, dtype=np.float64)
    if a.ndim < 1 or a.ndim > MAX_NDIM:
        raise ValidationError(f"{name}: rank must be 1..{MAX_NDIM}, got {a.ndim}")
    if any(d < 1 for d in a.shape):
        raise ValidationError(f"{name}: all dimensions must be >= 1, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name}: non-finite values are not allowed")
    return np.ascontiguousarray(a)


def tensor_to_bytes(arr) -> bytes:
    a = validate_tensor(arr)
    code = _DTYPE_CODES[np.dtype(a.dtype)]
    header = _HEADER.pack(MAGIC, VERSION, code, a.ndim, 0)
    dims = struct.pack(f"<{a.ndim}Q", *a.shape)
    payload = np.ascontiguousarray(a, dtype=_CODE_DTYPES[code]).tobytes()
    return header + dims + payload


def tensor_from_bytes(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise FormatError(f"truncated header: {len(data)} bytes")
    magic, version, code, ndim, reserved = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    if code not in _CODE_DTYPES:
        raise FormatError(f"unknown dtype code {code}")
    if not 1 <= ndim <= MAX_NDIM:
        raise FormatError(f"ndim must be 1..{MAX_NDIM}, got {ndim}")
    if reserved != 0:
        raise FormatError("reserved header bytes must be zero")
    dims_end = _HEADER.size + 8 * ndim
    if len(data) < dims_end:
        raise FormatError("truncated dimension list")
    shape = struct.unpack_from(f"<{ndim}Q", data, _HEADER.size)
    if any(d < 1 for d in shape):
        raise FormatError(f"zero-length dimension in {shape}")
    dtype = _CODE_DTYPES[code]
    count = 1
    for d in shape:
        count *= d
    expected = count * dtype.itemsize
    payload = data[dims_end:]
    if len(payload) != expected:
        raise FormatError(
            f"payload length {len(payload)} != {expected} required by shape {shape}"
        )
    arr = np.frombuffer(payload, dtype=dtype).reshape(shape)
    arr = arr.astype(arr.dtype.newbyteorder("="), copy=True)
    if not np.all(np.isfinite(arr)):
        raise ValidationError("non-finite values in payload")
    return arr


def write_tensor(arr, destination) -> int:
    """Serialize to a path or binary sink. Returns the byte count written."""
    blob = tensor_to_bytes(arr)
    if isinstance(destination, (str, bytes)) or hasattr(destination, "__fspath__"):
        with open(destination, "wb") as fh:
            fh.write(blob)
    else:
        destination.write(blob)
    return len(blob)


def read_tensor(source) -> np.ndarray:
    """Parse a TNSR stream from a path, binary file object, or bytes."""
    if isinstance(source, (bytes, bytearray)):
        return tensor_from_bytes(bytes(source))
    if isinstance(source, (str,)) or hasattr(source, "__fspath__"):
        with open(source, "rb") as fh:
            return tensor_from_bytes(fh.read())
    if isinstance(source, (io.IOBase, BinaryIO)) or hasattr(source, "read"):
        return tensor_from_bytes(source.read())
    raise FormatError(f"unsupported source type {type(source)!r}")
