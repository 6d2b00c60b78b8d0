"""Minimal binary tensor file format.

Layout: magic "RTEN", format version u32, rank u32, dims u32[rank], then
the payload as little-endian row-major f32.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

MAGIC = b"RTEN"
VERSION = 1


class TensorFormatError(ValueError):
    pass


def tensor_bytes(arr: np.ndarray) -> bytes:
    arr = np.ascontiguousarray(arr, dtype="<f4")
    header = MAGIC + struct.pack("<II", VERSION, arr.ndim)
    header += struct.pack(f"<{arr.ndim}I", *arr.shape)
    return header + arr.tobytes()


def write_tensor(path, arr: np.ndarray):
    with open(path, "wb") as f:
        f.write(tensor_bytes(arr))


def tensor_from_bytes(data: bytes) -> np.ndarray:
    if data[:4] != MAGIC:
        raise TensorFormatError("bad magic")
    version, rank = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise TensorFormatError(f"unsupported version {version}")
    dims = struct.unpack_from(f"<{rank}I", data, 12)
    payload = data[12 + 4 * rank :]
    expected = int(np.prod(dims)) * 4
    if len(payload) != expected:
        raise TensorFormatError(f"payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype="<f4").reshape(dims).copy()


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as f:
        return tensor_from_bytes(f.read())


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for block in iter(lambda: f.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()
