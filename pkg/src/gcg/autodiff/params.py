"""Named parameter storage and the binary checkpoint format."""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from gcg.autodiff.tape import Tensor
from gcg.errors import ConfigError, ParseError

MAGIC = b"GCGCKPT1"


class ParamStore:
    """Parameters, their gradient accumulators and Adam moments, keyed by name."""

    def __init__(self, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step = 0

    def add(self, name: str, value) -> np.ndarray:
        if name in self.params:
            raise ConfigError(f"duplicate parameter name {name!r}")
        arr = np.array(value, dtype=self.dtype, copy=True)
        self.params[name] = arr
        self.grads[name] = np.zeros_like(arr)
        self.m[name] = np.zeros_like(arr)
        self.v[name] = np.zeros_like(arr)
        return arr

    def __contains__(self, name):
        return name in self.params

    def __getitem__(self, name) -> np.ndarray:
        return self.params[name]

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    def names(self) -> list[str]:
        return list(self.params)

    def tensor(self, name: str) -> Tensor:
        """Leaf tensor whose gradient slot is this store's accumulator."""
        return Tensor(self.params[name], requires_grad=True, grad=self.grads[name], leaf=True, name=name)

    def tensors(self, prefix: str = "") -> dict[str, Tensor]:
        cut = len(prefix)
        return {k[cut:]: self.tensor(k) for k in self.params if k.startswith(prefix)}

    def zero_grad(self) -> None:
        for g in self.grads.values():
            g.fill(0.0)

    def snapshot(self) -> "ParamStore":
        """Independent copy of the parameter values (fresh gradients and moments)."""
        out = ParamStore(self.dtype)
        for k, v in self.params.items():
            out.add(k, v)
        return out

    def load_values(self, other: "ParamStore") -> None:
        """Copy values in place from a store with identical names and shapes."""
        self._check_compatible(other)
        for k, v in other.params.items():
            self.params[k][...] = v

    def polyak(self, other: "ParamStore", tau: float) -> None:
        """In-place soft update ``self <- tau*other + (1-tau)*self``."""
        self._check_compatible(other)
        for k, v in other.params.items():
            p = self.params[k]
            p[...] = tau * v + (1.0 - tau) * p

    def _check_compatible(self, other: "ParamStore") -> None:
        if list(other.params) != list(self.params):
            raise ConfigError("parameter stores have different names")
        for k, v in other.params.items():
            if v.shape != self.params[k].shape:
                raise ConfigError(f"parameter {k!r} shape {v.shape} != {self.params[k].shape}")

    def astype(self, dtype) -> "ParamStore":
        out = ParamStore(dtype)
        for k, v in self.params.items():
            out.add(k, v)
        return out

    def flat_size(self) -> int:
        return int(sum(v.size for v in self.params.values()))

    def equal(self, other: "ParamStore") -> bool:
        """Bitwise equality of names, shapes, dtypes and values."""
        if list(self.params) != list(other.params):
            return False
        return all(
            a.dtype == b.dtype and a.shape == b.shape and a.tobytes() == b.tobytes()
            for a, b in zip(self.params.values(), other.params.values())
        )


def save_checkpoint(store: ParamStore, path) -> None:
    """Write ``store`` as GCGCKPT1: magic, record count, then per-parameter records.

    Record: u32 name length, utf-8 name, u32 rank, u32 dims, little-endian f32 data.
    """
    chunks = [MAGIC, struct.pack("<I", len(store))]
    for name, arr in store.params.items():
        raw = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<I", arr.ndim))
        chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        chunks.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(b"".join(chunks))
    tmp.replace(path)


def load_checkpoint(path, dtype=np.float32) -> ParamStore:
    data = Path(path).read_bytes()
    if data[:8] != MAGIC:
        raise ParseError("not a GCGCKPT1 checkpoint", path=str(path))
    pos = 8

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise ParseError("truncated checkpoint", path=str(path))
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    store = ParamStore(dtype)
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        name = take(nlen).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        shape = struct.unpack(f"<{rank}I", take(4 * rank))
        n = int(np.prod(shape)) if rank else 1
        arr = np.frombuffer(take(4 * n), dtype="<f4").reshape(shape)
        store.add(name, arr)
    if pos != len(data):
        raise ParseError("trailing bytes after last record", path=str(path))
    return store
