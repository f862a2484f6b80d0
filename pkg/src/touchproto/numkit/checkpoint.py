"""Named parameter sets and their binary checkpoint container.

Container layout (all integers little-endian):
  magic b"TPK1" | u32 format version | u64 seed | u16 tag length | tag utf-8 |
  u32 tensor count | entries | 32-byte sha256 of everything before it.
Each entry: u16 name length | name utf-8 | u8 dtype code | u8 ndim |
u32 * ndim extents | raw little-endian array bytes.
"""

from __future__ import annotations

import hashlib
import struct

import numpy as np

from .tensor import ContractError, Tensor, parameter

FORMAT_VERSION = 1
_MAGIC = b"TPK1"
_DTYPES = {0: np.dtype("<f4"), 1: np.dtype("<f8")}
_DTYPE_CODES = {np.dtype("float32"): 0, np.dtype("float64"): 1}


class CheckpointError(RuntimeError):
    """Corrupt, truncated or version-incompatible checkpoint file."""


class ParamSet:
    """Ordered map from parameter path (e.g. "actor/fc1/weight") to Tensor."""

    def __init__(self, seed: int = 0, version: str = "1"):
        self.seed = int(seed)
        self.version = str(version)
        self._tensors: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._tensors:
            raise ContractError(f"duplicate parameter name {name!r}")
        t = parameter(data)
        self._tensors[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def __len__(self) -> int:
        return len(self._tensors)

    def names(self) -> list[str]:
        return list(self._tensors)

    def items(self):
        return self._tensors.items()

    def slice(self, prefix: str) -> dict[str, Tensor]:
        """Sub-map of parameters under `prefix/`, keyed by the remainder."""
        pre = prefix.rstrip("/") + "/"
        out = {n[len(pre):]: t for n, t in self._tensors.items() if n.startswith(pre)}
        if not out:
            raise KeyError(f"no parameters under {prefix!r}")
        return out

    def zero_grad(self):
        for t in self._tensors.values():
            t.grad = None

    def copy(self) -> "ParamSet":
        c = ParamSet(seed=self.seed, version=self.version)
        for n, t in self._tensors.items():
            c.add(n, t.data.copy())
        return c

    def load_values_from(self, other: "ParamSet"):
        """Copy values in place; names and shapes must match exactly."""
        if set(self._tensors) != set(other._tensors):
            raise ContractError("parameter name sets differ")
        for n, t in self._tensors.items():
            src = other._tensors[n].data
            if src.shape != t.data.shape:
                raise ContractError(f"shape mismatch for {n}: {src.shape} vs {t.data.shape}")
            t.data[...] = src

    def astype(self, dtype) -> "ParamSet":
        c = ParamSet(seed=self.seed, version=self.version)
        for n, t in self._tensors.items():
            c.add(n, t.data.astype(dtype))
        return c

    def to_bytes(self) -> bytes:
        chunks = [_MAGIC, struct.pack("<I", FORMAT_VERSION), struct.pack("<Q", self.seed)]
        tag = self.version.encode("utf-8")
        chunks.append(struct.pack("<H", len(tag)))
        chunks.append(tag)
        names = sorted(self._tensors)
        chunks.append(struct.pack("<I", len(names)))
        for name in names:
            arr = self._tensors[name].data
            if arr.dtype not in _DTYPE_CODES:
                raise CheckpointError(f"unsupported dtype {arr.dtype} for {name}")
            nb = name.encode("utf-8")
            chunks.append(struct.pack("<H", len(nb)))
            chunks.append(nb)
            chunks.append(struct.pack("<BB", _DTYPE_CODES[arr.dtype], arr.ndim))
            chunks.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
            le = arr.astype(arr.dtype.newbyteorder("<"), copy=False)
            chunks.append(le.tobytes())
        body = b"".join(chunks)
        return body + hashlib.sha256(body).digest()

    @classmethod
    def from_bytes(cls, blob: bytes) -> "ParamSet":
        if len(blob) < 32 + len(_MAGIC):
            raise CheckpointError("truncated checkpoint")
        body, digest = blob[:-32], blob[-32:]
        if hashlib.sha256(body).digest() != digest:
            raise CheckpointError("checksum mismatch: corrupt or truncated checkpoint")
        r = _Reader(body)
        if r.take(len(_MAGIC)) != _MAGIC:
            raise CheckpointError("bad magic: not a checkpoint file")
        fmt = r.u32()
        if fmt != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint format version {fmt} (expected {FORMAT_VERSION})")
        seed = r.u64()
        tag = r.take(r.u16()).decode("utf-8")
        ps = cls(seed=seed, version=tag)
        count = r.u32()
        for _ in range(count):
            name = r.take(r.u16()).decode("utf-8")
            code, ndim = struct.unpack("<BB", r.take(2))
            if code not in _DTYPES:
                raise CheckpointError(f"unknown dtype code {code}")
            shape = struct.unpack(f"<{ndim}I", r.take(4 * ndim))
            n = int(np.prod(shape)) if shape else 1
            raw = r.take(n * _DTYPES[code].itemsize)
            arr = np.frombuffer(raw, dtype=_DTYPES[code]).reshape(shape).astype(_DTYPES[code].newbyteorder("="))
            ps.add(name, arr)
        if r.remaining():
            raise CheckpointError("trailing bytes after last tensor")
        return ps

    def sha256(self) -> str:
        return hashlib.sha256(self.to_bytes()).hexdigest()


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CheckpointError("truncated checkpoint")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def remaining(self) -> int:
        return len(self.buf) - self.pos


def save_params(params: ParamSet, path):
    data = params.to_bytes()
    with open(path, "wb") as f:
        f.write(data)


def load_params(path) -> ParamSet:
    with open(path, "rb") as f:
        blob = f.read()
    return ParamSet.from_bytes(blob)
