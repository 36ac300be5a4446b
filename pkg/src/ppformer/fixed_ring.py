"""Fixed-point arithmetic over power-of-two rings Z_{2^ell}.

Residues live in ``uint64`` arrays and are masked back to ``ell`` bits after
every operation; ``ell == 64`` relies on the natural uint64 wraparound.
Negative reals use the two's-complement embedding.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "RingParams",
    "RingTensor",
    "encode_real",
    "decode_real",
    "encode_array",
    "decode_array",
    "to_signed",
    "from_signed",
    "ring_matmul",
    "local_downcast",
    "plain_truncate",
]


@dataclass(frozen=True)
class RingParams:
    ell: int = 64
    scale: int = 18

    def __post_init__(self):
        if not 1 <= self.ell <= 64:
            raise ValueError(f"ell must be in [1, 64], got {self.ell}")
        if not 0 <= self.scale < self.ell:
            raise ValueError(f"scale must be in [0, ell), got {self.scale}")

    @property
    def modulus(self) -> int:
        return 1 << self.ell

    @property
    def mask(self) -> np.uint64:
        return np.uint64((1 << self.ell) - 1)

    def with_scale(self, scale: int) -> "RingParams":
        return RingParams(self.ell, scale)


def _mask(data: np.ndarray, ell: int) -> np.ndarray:
    if ell == 64:
        return data
    return data & np.uint64((1 << ell) - 1)


def to_signed(data: np.ndarray, ell: int) -> np.ndarray:
    """Signed two's-complement view of residues as int64."""
    data = np.asarray(data, dtype=np.uint64)
    if ell == 64:
        return data.view(np.int64)
    half = np.uint64(1 << (ell - 1))
    signed = data.astype(np.int64)
    return np.where(data >= half, signed - (1 << ell), signed)


def from_signed(values, ell: int) -> np.ndarray:
    """Embed signed integers (int64 or Python ints) as ell-bit residues."""
    arr = np.asarray(values)
    if arr.dtype == object:
        m = (1 << ell) - 1
        flat = [int(v) & m for v in arr.ravel()]
        return np.array(flat, dtype=np.uint64).reshape(arr.shape)
    return _mask(arr.astype(np.int64).view(np.uint64), ell)


@dataclass
class RingTensor:
    """Row-major matrix of ell-bit residues at a fixed-point scale."""

    params: RingParams
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim == 1:
            data = data.reshape(1, -1)
        if data.ndim != 2:
            raise ValueError("RingTensor data must be 2-D")
        if data.dtype != np.uint64:
            if data.dtype == object or np.issubdtype(data.dtype, np.signedinteger):
                data = from_signed(data, self.params.ell)
            else:
                data = data.astype(np.uint64)
        self.data = _mask(data, self.params.ell)

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    @property
    def cols(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    @classmethod
    def zeros(cls, params: RingParams, rows: int, cols: int) -> "RingTensor":
        return cls(params, np.zeros((rows, cols), dtype=np.uint64))

    @classmethod
    def from_real(cls, values, params: RingParams) -> "RingTensor":
        return cls(params, encode_array(values, params))

    @classmethod
    def random(cls, params: RingParams, rows: int, cols: int, rng: np.random.Generator) -> "RingTensor":
        return cls(params, uniform_residues(rng, params.ell, (rows, cols)))

    def to_real(self) -> np.ndarray:
        return decode_array(self.data, self.params)

    def signed(self) -> np.ndarray:
        return to_signed(self.data, self.params.ell)

    def _check(self, other: "RingTensor"):
        if self.params.ell != other.params.ell:
            raise ValueError(f"ring mismatch: ell={self.params.ell} vs {other.params.ell}")
        if self.shape != other.shape:
            raise ValueError(f"shape mismatch: {self.shape} vs {other.shape}")

    def __add__(self, other: "RingTensor") -> "RingTensor":
        self._check(other)
        return RingTensor(self.params, _mask(self.data + other.data, self.params.ell))

    def __sub__(self, other: "RingTensor") -> "RingTensor":
        self._check(other)
        return RingTensor(self.params, _mask(self.data - other.data, self.params.ell))

    def __neg__(self) -> "RingTensor":
        return RingTensor(self.params, _mask(np.uint64(0) - self.data, self.params.ell))

    def add_const(self, c: int) -> "RingTensor":
        c = np.uint64(int(c) % self.params.modulus)
        return RingTensor(self.params, _mask(self.data + c, self.params.ell))

    def mul_const(self, c: int) -> "RingTensor":
        """Multiply by a public integer constant; the scale is unchanged."""
        c = np.uint64(int(c) % self.params.modulus)
        return RingTensor(self.params, _mask(self.data * c, self.params.ell))

    def copy(self) -> "RingTensor":
        return RingTensor(self.params, self.data.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, RingTensor):
            return NotImplemented
        return self.params.ell == other.params.ell and np.array_equal(self.data, other.data)


def uniform_residues(rng: np.random.Generator, ell: int, shape) -> np.ndarray:
    raw = rng.integers(0, np.iinfo(np.uint64).max, size=shape, dtype=np.uint64, endpoint=True)
    return _mask(raw, ell)


def encode_real(x: float, params: RingParams) -> int:
    """floor(x * 2^s) mod 2^ell, raising OverflowError outside the signed half-range."""
    v = math.floor(x * (1 << params.scale))
    if abs(v) >= 1 << (params.ell - 1):
        raise OverflowError(f"{x} does not fit in ell={params.ell} at scale {params.scale}")
    return v % params.modulus


def decode_real(r: int, params: RingParams) -> float:
    r = int(r) % params.modulus
    if r >= 1 << (params.ell - 1):
        r -= params.modulus
    return r / (1 << params.scale)


def encode_array(values, params: RingParams) -> np.ndarray:
    x = np.atleast_2d(np.asarray(values, dtype=np.float64))
    v = np.floor(x * float(1 << params.scale))
    if np.any(np.abs(v) >= float(1 << (params.ell - 1))):
        raise OverflowError(f"values exceed the signed range of ell={params.ell} at scale {params.scale}")
    if params.ell > 53:
        # float64 cannot carry every residue; go through Python ints
        return from_signed(np.array([int(t) for t in v.ravel()], dtype=object).reshape(v.shape), params.ell)
    return from_signed(v.astype(np.int64), params.ell)


def decode_array(data: np.ndarray, params: RingParams) -> np.ndarray:
    return to_signed(data, params.ell).astype(np.float64) / float(1 << params.scale)


def ring_matmul(a: RingTensor, b: RingTensor) -> RingTensor:
    """a @ b mod 2^ell; the result scale is the sum of the operand scales."""
    if a.params.ell != b.params.ell:
        raise ValueError("ring_matmul operands live in different rings")
    if a.cols != b.rows:
        raise ValueError(f"dimension mismatch: {a.shape} @ {b.shape}")
    ell = a.params.ell
    scale = min(a.params.scale + b.params.scale, ell - 1)
    # uint64 matmul wraps mod 2^64, which is exact mod 2^ell after masking
    out = a.data @ b.data
    return RingTensor(RingParams(ell, scale), _mask(out, ell))


def local_downcast(t: RingTensor, ell_small: int) -> RingTensor:
    """Reduce every residue mod 2^ell_small (a purely local share operation)."""
    if ell_small > t.params.ell:
        raise ValueError("downcast target must not exceed the current ring")
    scale = t.params.scale
    if scale >= ell_small:
        raise ValueError("scale does not fit in the smaller ring")
    return RingTensor(RingParams(ell_small, scale), _mask(t.data, ell_small))


def plain_truncate(t: RingTensor, shift: int) -> RingTensor:
    """Arithmetic (floor) right shift of the signed value; reduces the scale."""
    if shift == 0:
        return t.copy()
    signed = t.signed() >> shift
    return RingTensor(t.params.with_scale(max(t.params.scale - shift, 0)), from_signed(signed, t.params.ell))
