#!/usr/bin/env python3
"""
Binary Tensor Container

Layout (all integers little-endian):
    magic    4 bytes  b"SPDT"
    version  1 byte   (1)
    ndim     uint32
    dims     ndim x uint64
    data     prod(dims) x float64 ('<f8'), row-major

The same record is used standalone (one tensor per file) and embedded in
checkpoint files.
"""

import os
import struct
from typing import BinaryIO, Optional, Sequence

import numpy as np

from common.exceptions import FormatError, MissingFileError
from utils.output_dir import atomic_write_bytes


TENSOR_MAGIC = b"SPDT"
TENSOR_VERSION = 1


def encode_tensor(array: np.ndarray) -> bytes:
    # ascontiguousarray promotes 0-d arrays to 1-d; keep the original shape
    array = np.ascontiguousarray(array, dtype="<f8").reshape(np.shape(array))
    header = TENSOR_MAGIC + struct.pack("<BI", TENSOR_VERSION, array.ndim)
    header += struct.pack(f"<{array.ndim}Q", *array.shape)
    return header + array.tobytes(order="C")


def _read_exact(fh: BinaryIO, count: int, source: str, field: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise FormatError(source, field, f"unexpected end of file (wanted {count} bytes, got {len(data)})")
    return data


def read_tensor_from(fh: BinaryIO, source: str = "<stream>") -> np.ndarray:
    """Read one tensor record from an open binary stream"""
    magic = _read_exact(fh, 4, source, "magic")
    if magic != TENSOR_MAGIC:
        raise FormatError(source, "magic", f"expected {TENSOR_MAGIC!r}, got {magic!r}")
    version, ndim = struct.unpack("<BI", _read_exact(fh, 5, source, "version"))
    if version != TENSOR_VERSION:
        raise FormatError(source, "version", f"unsupported tensor version {version} (expected {TENSOR_VERSION})")
    dims = struct.unpack(f"<{ndim}Q", _read_exact(fh, 8 * ndim, source, "dims")) if ndim else ()
    count = int(np.prod(dims, dtype=np.int64)) if ndim else 1
    data = _read_exact(fh, 8 * count, source, "data")
    return np.frombuffer(data, dtype="<f8").reshape(dims).astype(np.float64)


def write_tensor(path: str, array: np.ndarray):
    atomic_write_bytes(path, encode_tensor(array))


def read_tensor(path: str, expected_shape: Optional[Sequence[int]] = None) -> np.ndarray:
    """Read a standalone tensor file, optionally checking its shape"""
    if not os.path.isfile(path):
        raise MissingFileError(path, "tensor file")
    with open(path, "rb") as fh:
        array = read_tensor_from(fh, path)
        if fh.read(1):
            raise FormatError(path, "data", "trailing bytes after tensor data")
    if expected_shape is not None and tuple(array.shape) != tuple(expected_shape):
        raise FormatError(path, "shape", f"declared {list(expected_shape)}, found {list(array.shape)}")
    return array
