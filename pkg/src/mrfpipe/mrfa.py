"""MRFA binary array format.

A file holds one or more self-delimiting records. Each record is:

    magic   4 bytes   b"MRFA"
    version 1 byte    0x01
    dtype   1 byte    0x01 = IEEE-754 64-bit little-endian float
                      0x02 = 8-bit boolean (0x00 / 0x01)
    rank    1 byte    number of dimensions (0 allowed for scalars)
    dims    rank * 8 bytes, unsigned 64-bit little-endian
    payload row-major (C order) element data

The format is deliberately dependency-free so arrays interchange
bit-exactly between runs and platforms.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC = b"MRFA"
VERSION = 1

DTYPE_FLOAT64 = 0x01
DTYPE_BOOL = 0x02

_DTYPE_TO_CODE = {np.dtype("<f8"): DTYPE_FLOAT64, np.dtype("bool"): DTYPE_BOOL}
_CODE_TO_DTYPE = {DTYPE_FLOAT64: np.dtype("<f8"), DTYPE_BOOL: np.dtype("bool")}
_ELEMENT_SIZE = {DTYPE_FLOAT64: 8, DTYPE_BOOL: 1}


class MrfaFormatError(Exception):
    """Raised when a file does not conform to the MRFA layout."""


def _encode(array: np.ndarray) -> bytes:
    arr = np.asarray(array)
    if arr.dtype == np.bool_:
        code = DTYPE_BOOL
        payload = np.ascontiguousarray(arr, dtype=np.uint8)
        payload = (payload != 0).astype(np.uint8)
    else:
        code = DTYPE_FLOAT64
        payload = np.ascontiguousarray(arr, dtype="<f8")
    header = MAGIC + bytes([VERSION, code, arr.ndim])
    header += b"".join(struct.pack("<Q", d) for d in arr.shape)
    return header + payload.tobytes()


def write_arrays(path, arrays) -> None:
    """Write a sequence of float64/bool arrays as consecutive MRFA records."""
    blobs = [_encode(a) for a in arrays]
    Path(path).write_bytes(b"".join(blobs))


def write_mrfa(array, path) -> None:
    """Write a single array to *path* in the MRFA format."""
    write_arrays(path, [array])


def _read_record(buf: bytes, offset: int, path) -> tuple[np.ndarray, int]:
    def fail(field, detail):
        raise MrfaFormatError(f"{path}: bad {field} at offset {offset}: {detail}")

    if len(buf) - offset < 7:
        fail("header", f"only {len(buf) - offset} bytes remain, need 7")
    if buf[offset : offset + 4] != MAGIC:
        fail("magic", f"expected {MAGIC!r}, got {buf[offset:offset + 4]!r}")
    version = buf[offset + 4]
    if version != VERSION:
        fail("version", f"expected {VERSION}, got {version}")
    code = buf[offset + 5]
    if code not in _CODE_TO_DTYPE:
        fail("dtype", f"unknown code 0x{code:02x}")
    rank = buf[offset + 6]
    pos = offset + 7
    if len(buf) - pos < 8 * rank:
        fail("dims", f"need {8 * rank} bytes for {rank} dims, have {len(buf) - pos}")
    dims = tuple(
        struct.unpack_from("<Q", buf, pos + 8 * i)[0] for i in range(rank)
    )
    pos += 8 * rank
    count = 1
    for d in dims:
        count *= d
    nbytes = count * _ELEMENT_SIZE[code]
    if len(buf) - pos < nbytes:
        fail("payload", f"dims {dims} need {nbytes} bytes, have {len(buf) - pos}")
    raw = buf[pos : pos + nbytes]
    if code == DTYPE_BOOL:
        flat = np.frombuffer(raw, dtype=np.uint8)
        bad = np.logical_and(flat != 0, flat != 1)
        if bad.any():
            fail("payload", "boolean payload contains bytes other than 0x00/0x01")
        arr = flat.astype(bool)
    else:
        arr = np.frombuffer(raw, dtype="<f8").copy()
    return arr.reshape(dims), pos + nbytes


def read_arrays(path) -> list[np.ndarray]:
    """Read every MRFA record in *path*, in order."""
    buf = Path(path).read_bytes()
    if not buf:
        raise MrfaFormatError(f"{path}: bad magic at offset 0: file is empty")
    arrays = []
    offset = 0
    while offset < len(buf):
        arr, offset = _read_record(buf, offset, path)
        arrays.append(arr)
    return arrays


def read_mrfa(path) -> np.ndarray:
    """Read a file expected to contain exactly one MRFA record."""
    arrays = read_arrays(path)
    if len(arrays) != 1:
        raise MrfaFormatError(f"{path}: expected 1 record, found {len(arrays)}")
    return arrays[0]
