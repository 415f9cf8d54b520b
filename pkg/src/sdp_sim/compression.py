"""Top-k magnitude sparsification and its sparse wire encoding.

Wire format (little-endian): u32 dim, u32 entry count, then one
(u32 index, f64 value) record per entry in ascending index order.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import ConfigError, Gradient

_HEADER = struct.Struct("<II")
_ENTRY = struct.Struct("<Id")


class CodecError(ValueError):
    """Malformed or incompatible compressed gradient."""


def kept_count(ratio: float, dim: int) -> int:
    """k = ceil(ratio * dim), ignoring float noise below 1e-9 (0.1 * 30 is 3, not 4)."""
    if not 0 < ratio <= 1:
        raise ConfigError(f"compression ratio must lie in (0, 1], got {ratio}")
    return max(1, min(dim, math.ceil(round(ratio * dim, 9))))


@dataclass(frozen=True, eq=False)
class CompressedGradient:
    dim: int
    indices: np.ndarray
    values: np.ndarray
    ratio: float = 1.0

    def __len__(self) -> int:
        return self.indices.size

    def __eq__(self, other) -> bool:
        if not isinstance(other, CompressedGradient):
            return NotImplemented
        return (
            self.dim == other.dim
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )

    @property
    def entries(self) -> list[tuple[int, float]]:
        return [(int(i), float(v)) for i, v in zip(self.indices, self.values)]

    def validate(self):
        idx = self.indices
        if idx.shape != self.values.shape or idx.ndim != 1:
            raise CodecError("indices and values must be equal-length vectors")
        if idx.size and (idx[0] < 0 or idx[-1] >= self.dim):
            raise CodecError(f"index out of range for dim {self.dim}")
        if np.any(np.diff(idx) <= 0):
            raise CodecError("indices must be strictly increasing (no duplicates)")

    def nbytes(self) -> int:
        return _HEADER.size + _ENTRY.size * len(self)

    def to_bytes(self) -> bytes:
        parts = [_HEADER.pack(self.dim, len(self))]
        parts.extend(_ENTRY.pack(int(i), float(v)) for i, v in zip(self.indices, self.values))
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, buf: bytes, offset: int = 0) -> tuple["CompressedGradient", int]:
        """Decode one encoding starting at ``offset``; returns it and the end offset."""
        try:
            dim, count = _HEADER.unpack_from(buf, offset)
        except struct.error as exc:
            raise CodecError(f"truncated header: {exc}") from None
        offset += _HEADER.size
        end = offset + count * _ENTRY.size
        if end > len(buf):
            raise CodecError(f"expected {count} entries, buffer too short")
        records = list(_ENTRY.iter_unpack(buf[offset:end])) if count else []
        idx = np.array([r[0] for r in records], dtype=np.int64)
        vals = np.array([r[1] for r in records], dtype=np.float64)
        ratio = count / dim if dim else 1.0
        cg = cls(dim, idx, vals, ratio)
        cg.validate()
        return cg, end


def compress(g: Gradient, ratio: float) -> CompressedGradient:
    """Keep the ceil(ratio*d) largest-magnitude coordinates; ties go to the lower index."""
    g = np.asarray(g, dtype=np.float64)
    k = kept_count(ratio, g.size)
    # stable sort keeps lower indices first among equal magnitudes
    order = np.argsort(-np.abs(g), kind="stable")
    kept = np.sort(order[:k])
    return CompressedGradient(g.size, kept.astype(np.int64), g[kept].copy(), ratio)


def decompress(cg: CompressedGradient) -> Gradient:
    cg.validate()
    out = np.zeros(cg.dim)
    out[cg.indices] = cg.values
    return out


def aggregate_compressed(cgs: Sequence[CompressedGradient]) -> Gradient:
    """Dense sum, accumulated in list order (indices ascending within each)."""
    if not cgs:
        raise CodecError("nothing to aggregate")
    dim = cgs[0].dim
    out = np.zeros(dim)
    for cg in cgs:
        if cg.dim != dim:
            raise CodecError(f"dimension mismatch: {cg.dim} vs {dim}")
        cg.validate()
        out[cg.indices] += cg.values
    return out
