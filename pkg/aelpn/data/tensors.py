"""
Raw tensor records

Layout, little-endian throughout:

    b"AELP" | u32 version (1) | u32 rank | u64 dims[rank] | f64 values (row-major)

Records can be concatenated; checkpoints store one per parameter.
"""

from pathlib import Path
from typing import BinaryIO

import numpy as np

from ..errors import TensorFormatError

MAGIC = b"AELP"
VERSION = 1

_U32 = np.dtype("<u4")
_U64 = np.dtype("<u8")
_F64 = np.dtype("<f8")


def _tell(stream: BinaryIO) -> int:
    try:
        return stream.tell()
    except (OSError, AttributeError):
        return -1


def _read_exact(stream: BinaryIO, count: int, what: str) -> bytes:
    offset = _tell(stream)
    data = stream.read(count)
    if len(data) != count:
        raise TensorFormatError(
            f"Truncated {what}: expected {count} bytes, got {len(data)}",
            offset if offset >= 0 else None,
        )
    return data


def write_tensor(stream: BinaryIO, array) -> int:
    """Append one record; returns the number of bytes written"""
    arr = np.ascontiguousarray(array, dtype=_F64)
    header = (
        MAGIC
        + np.array([VERSION, arr.ndim], dtype=_U32).tobytes()
        + np.array(arr.shape, dtype=_U64).tobytes()
    )
    payload = arr.tobytes(order="C")
    stream.write(header)
    stream.write(payload)
    return len(header) + len(payload)


def read_tensor(stream: BinaryIO) -> np.ndarray:
    """
    Read one record

    Raises:
        TensorFormatError: Bad magic, unsupported version, or a short read
    """
    offset = _tell(stream)
    magic = _read_exact(stream, 4, "tensor magic")
    if magic != MAGIC:
        raise TensorFormatError(f"Bad tensor magic {magic!r}", offset if offset >= 0 else None)
    version, rank = np.frombuffer(_read_exact(stream, 8, "tensor header"), dtype=_U32)
    if version != VERSION:
        raise TensorFormatError(f"Unsupported tensor version {int(version)}", offset if offset >= 0 else None)
    dims = np.frombuffer(_read_exact(stream, 8 * int(rank), "tensor dims"), dtype=_U64)
    shape = tuple(int(d) for d in dims)
    count = int(np.prod(shape)) if shape else 1
    values = np.frombuffer(_read_exact(stream, 8 * count, "tensor payload"), dtype=_F64)
    return values.astype(np.float64).reshape(shape)


def save_tensor(path, array) -> None:
    with open(Path(path), "wb") as f:
        write_tensor(f, array)


def load_tensor(path) -> np.ndarray:
    with open(Path(path), "rb") as f:
        return read_tensor(f)
