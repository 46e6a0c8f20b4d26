"""
Bit-string helpers and the ARR1 named-array container.

Bit strings are numpy uint8 arrays of 0/1 values, most significant bit first.
"""

from __future__ import annotations

from collections.abc import Mapping
import math
import struct

import numpy as np
from numpy.typing import NDArray

from qzk_lab.core.errors import FormatError

Bits = NDArray[np.uint8]

ARRAY_MAGIC = b"ARR1"

_DTYPES: dict[int, np.dtype] = {
    0: np.dtype("<u1"),
    1: np.dtype("<u2"),
    2: np.dtype("<u4"),
    3: np.dtype("<u8"),
    4: np.dtype("<i8"),
    5: np.dtype("<f8"),
    6: np.dtype("<c16"),
}
_CODES = {dt.newbyteorder("=").str.lstrip("<>|="): code for code, dt in _DTYPES.items()}

_MAX_NDIM = 8
_MAX_NAME = 255


def ceil_log2(n: int) -> int:
    """Number of bits needed to index n items (at least 1)."""
    return max(1, math.ceil(math.log2(n))) if n > 1 else 1


def int_to_bits(value: int, width: int) -> Bits:
    if value < 0 or (width < 64 and value >> width):
        raise FormatError(f"value {value} does not fit in {width} bits")
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return ((np.uint64(value) >> shifts) & np.uint64(1)).astype(np.uint8)


def bits_to_int(bits: NDArray[np.integer]) -> int:
    out = 0
    for b in np.asarray(bits).ravel():
        out = (out << 1) | int(b & 1)
    return out


def words_to_bits(words: NDArray[np.unsignedinteger], width: int) -> Bits:
    """Expand an array of integers into a trailing axis of `width` bits, MSB first."""
    w = np.asarray(words, dtype=np.uint64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.uint64)
    return ((w[..., None] >> shifts) & np.uint64(1)).astype(np.uint8)


def bits_to_words(bits: NDArray[np.integer]) -> NDArray[np.uint64]:
    """Collapse the trailing bit axis (MSB first) into uint64 words."""
    b = np.asarray(bits, dtype=np.uint64)
    width = b.shape[-1]
    if width > 64:
        raise FormatError(f"cannot pack {width} bits into a 64-bit word")
    weights = np.uint64(1) << np.arange(width - 1, -1, -1, dtype=np.uint64)
    return (b * weights).sum(axis=-1, dtype=np.uint64)


def random_bits(rng: np.random.Generator, *shape: int) -> Bits:
    return rng.integers(0, 2, size=shape, dtype=np.uint8)


def bits_to_bytes(bits: NDArray[np.integer]) -> bytes:
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


def bytes_to_bits(data: bytes, width: int | None = None) -> Bits:
    out = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    return out if width is None else out[:width]


# ---------- ARR1 container ----------


def pack_arrays(arrays: Mapping[str, NDArray[np.generic] | int]) -> bytes:
    """Serialize named numpy arrays (or plain ints) into an ARR1 blob."""
    parts = [ARRAY_MAGIC, struct.pack("<I", len(arrays))]
    for name, value in arrays.items():
        arr = np.asarray(value)
        if arr.dtype == np.bool_:
            arr = arr.astype(np.uint8)
        if arr.dtype.kind == "i" and arr.dtype != np.int64:
            arr = arr.astype(np.int64)
        code = _CODES.get(arr.dtype.newbyteorder("=").str.lstrip("<>|="))
        if code is None:
            raise FormatError(f"unsupported dtype {arr.dtype} for '{name}'")
        encoded = name.encode()
        if len(encoded) > _MAX_NAME or arr.ndim > _MAX_NDIM:
            raise FormatError(f"array '{name}' exceeds container limits")
        parts.append(struct.pack("<H", len(encoded)))
        parts.append(encoded)
        parts.append(struct.pack("<BB", code, arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype=_DTYPES[code]).tobytes())
    return b"".join(parts)


def unpack_arrays(blob: bytes) -> dict[str, NDArray[np.generic]]:
    """Inverse of pack_arrays; any inconsistency raises FormatError."""
    view = memoryview(blob)
    if bytes(view[:4]) != ARRAY_MAGIC:
        raise FormatError("bad array container magic")
    try:
        (count,) = struct.unpack_from("<I", view, 4)
        pos = 8
        out: dict[str, NDArray[np.generic]] = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", view, pos)
            pos += 2
            name = bytes(view[pos : pos + name_len]).decode()
            if len(name.encode()) != name_len:
                raise FormatError("truncated array name")
            pos += name_len
            code, ndim = struct.unpack_from("<BB", view, pos)
            pos += 2
            if code not in _DTYPES or ndim > _MAX_NDIM:
                raise FormatError(f"bad dtype code {code} or rank {ndim}")
            shape = struct.unpack_from(f"<{ndim}I", view, pos)
            pos += 4 * ndim
            dtype = _DTYPES[code]
            nbytes = math.prod(shape) * dtype.itemsize
            if pos + nbytes > len(view):
                raise FormatError(f"array '{name}' truncated")
            arr = np.frombuffer(view[pos : pos + nbytes], dtype=dtype).reshape(shape)
            pos += nbytes
            out[name] = arr.astype(dtype.newbyteorder("="))
        if pos != len(view):
            raise FormatError(f"{len(view) - pos} trailing bytes after arrays")
        return out
    except struct.error as e:
        raise FormatError(f"truncated array container: {e}") from e
    except UnicodeDecodeError as e:
        raise FormatError(f"array name is not UTF-8: {e}") from e
    except ValueError as e:
        raise FormatError(f"inconsistent array container: {e}") from e
