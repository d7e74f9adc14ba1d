"""Binary tensor snapshots and named-collection checkpoints.

Single tensor ("FDN1"): magic, u8 dtype tag (0=f32, 1=f64), u32 rank,
u32 dims, then the little-endian payload. Collections ("FDNC"): magic,
u32 entry count, then per entry a u16 name length, the UTF-8 name, and
an embedded FDN1 block. All integers little-endian.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

MAGIC_TENSOR = b"FDN1"
MAGIC_CHECKPOINT = b"FDNC"

_TAG_FOR_DTYPE = {np.dtype(np.float32): 0, np.dtype(np.float64): 1}
_DTYPE_FOR_TAG = {0: np.dtype("<f4"), 1: np.dtype("<f8")}


def tensor_bytes(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr)
    tag = _TAG_FOR_DTYPE.get(arr.dtype)
    if tag is None:
        raise ValueError(f"unsupported dtype {arr.dtype}")
    head = MAGIC_TENSOR + struct.pack("<BI", tag, arr.ndim)
    head += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return head + arr.astype(_DTYPE_FOR_TAG[tag], copy=False).tobytes()


def tensor_from_bytes(buf: bytes, offset: int = 0) -> tuple[np.ndarray, int]:
    """Decode one FDN1 block; returns (array, next offset)."""
    if buf[offset:offset + 4] != MAGIC_TENSOR:
        raise ValueError("bad tensor magic")
    tag, rank = struct.unpack_from("<BI", buf, offset + 4)
    dims = struct.unpack_from(f"<{rank}I", buf, offset + 9)
    dtype = _DTYPE_FOR_TAG[tag]
    start = offset + 9 + 4 * rank
    count = int(np.prod(dims)) if rank else 1
    end = start + count * dtype.itemsize
    arr = np.frombuffer(buf[start:end], dtype=dtype).reshape(dims)
    return arr.astype(dtype.newbyteorder("=")), end


def save_tensor(path, arr: np.ndarray):
    Path(path).write_bytes(tensor_bytes(arr))


def load_tensor(path) -> np.ndarray:
    arr, _ = tensor_from_bytes(Path(path).read_bytes())
    return arr


def checkpoint_bytes(named: dict[str, np.ndarray]) -> bytes:
    out = [MAGIC_CHECKPOINT, struct.pack("<I", len(named))]
    for name, arr in named.items():
        enc = name.encode("utf-8")
        out.append(struct.pack("<H", len(enc)))
        out.append(enc)
        out.append(tensor_bytes(arr))
    return b"".join(out)


def checkpoint_from_bytes(buf: bytes) -> dict[str, np.ndarray]:
    if buf[:4] != MAGIC_CHECKPOINT:
        raise ValueError("bad checkpoint magic")
    (count,) = struct.unpack_from("<I", buf, 4)
    offset = 8
    named = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", buf, offset)
        offset += 2
        name = buf[offset:offset + nlen].decode("utf-8")
        offset += nlen
        arr, offset = tensor_from_bytes(buf, offset)
        named[name] = arr
    return named


def save_checkpoint(path, named: dict[str, np.ndarray]):
    Path(path).write_bytes(checkpoint_bytes(named))


def load_checkpoint(path) -> dict[str, np.ndarray]:
    return checkpoint_from_bytes(Path(path).read_bytes())
