"""Weight serialization.

File layout (little-endian throughout)::

    magic   4 bytes  b"EARF"
    version u32      currently 1
    config  u64      FNV-1a hash of the canonical config text
    count   u32      number of tensors
    then per tensor:
        name_len u32, name utf-8 bytes,
        rank     u8,  dims rank*u32,
        data     float32 raw bytes, row-major

Round trips are bit-exact: save -> load -> save produces identical files.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import WeightLoadError

MAGIC = b"EARF"
VERSION = 1

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


class WeightStore:
    """Ordered name -> float32 array mapping plus a config fingerprint."""

    def __init__(self, config_hash: int = 0, version: int = VERSION):
        self.config_hash = config_hash
        self.version = version
        self._tensors: dict[str, np.ndarray] = {}

    def put(self, name: str, array: np.ndarray) -> None:
        self._tensors[name] = np.ascontiguousarray(array, dtype=np.float32)

    def get(self, name: str) -> np.ndarray:
        return self._tensors[name]

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def __len__(self) -> int:
        return len(self._tensors)

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def element_count(self) -> int:
        return sum(int(a.size) for a in self._tensors.values())


def write_tensor_record(f, name: str, array: np.ndarray) -> None:
    data = np.ascontiguousarray(array, dtype=np.float32)
    encoded = name.encode("utf-8")
    f.write(struct.pack("<I", len(encoded)))
    f.write(encoded)
    f.write(struct.pack("<B", data.ndim))
    f.write(struct.pack(f"<{data.ndim}I", *data.shape))
    f.write(data.tobytes())


def _read_exact(f, n: int) -> bytes:
    buf = f.read(n)
    if len(buf) != n:
        raise WeightLoadError("truncated weight file")
    return buf


def read_tensor_record(f) -> tuple[str, np.ndarray]:
    (name_len,) = struct.unpack("<I", _read_exact(f, 4))
    name = _read_exact(f, name_len).decode("utf-8")
    (rank,) = struct.unpack("<B", _read_exact(f, 1))
    dims = struct.unpack(f"<{rank}I", _read_exact(f, 4 * rank))
    count = int(np.prod(dims, dtype=np.int64)) if rank else 1
    raw = _read_exact(f, 4 * count)
    array = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    return name, array


def save_weights(store: WeightStore, path) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", store.version))
        f.write(struct.pack("<Q", store.config_hash))
        f.write(struct.pack("<I", len(store)))
        for name, array in store.items():
            write_tensor_record(f, name, array)


def load_weights(path) -> WeightStore:
    with open(path, "rb") as f:
        if _read_exact(f, 4) != MAGIC:
            raise WeightLoadError(f"{path}: not a weight file (bad magic)")
        (version,) = struct.unpack("<I", _read_exact(f, 4))
        if version != VERSION:
            raise WeightLoadError(f"{path}: unsupported version {version}")
        (config_hash,) = struct.unpack("<Q", _read_exact(f, 8))
        (count,) = struct.unpack("<I", _read_exact(f, 4))
        store = WeightStore(config_hash=config_hash, version=version)
        for _ in range(count):
            name, array = read_tensor_record(f)
            store.put(name, array)
        if f.read(1):
            raise WeightLoadError(f"{path}: trailing bytes after last tensor")
    return store
