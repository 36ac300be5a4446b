"""Arithmetic in Z_q[X]/(X^N + 1) with power-of-two q.

Coefficients are Python integers held in numpy object arrays, so any q width
works. ``negacyclic_mul`` has two exact back ends: a schoolbook convolution
(used for small N and as the reference) and a limb-split floating-point FFT
whose rounding is verified on every call.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PolyParams",
    "Poly",
    "negacyclic_mul",
    "scalar_mul",
    "monomial_shift",
    "schoolbook_negacyclic",
]

FFT_THRESHOLD = 64


@dataclass(frozen=True)
class PolyParams:
    n: int
    q_bits: int = 128
    t_bits: int = 64

    def __post_init__(self):
        if self.n < 1 or self.n & (self.n - 1):
            raise ValueError(f"N must be a power of two, got {self.n}")
        if not 0 < self.t_bits < self.q_bits:
            raise ValueError(f"need 0 < t_bits < q_bits, got t_bits={self.t_bits}, q_bits={self.q_bits}")

    @property
    def q(self) -> int:
        return 1 << self.q_bits

    @property
    def t(self) -> int:
        return 1 << self.t_bits

    @property
    def delta(self) -> int:
        return 1 << (self.q_bits - self.t_bits)

    @property
    def coeff_bytes(self) -> int:
        return (self.q_bits + 7) // 8


def _as_object(values, n: int | None = None) -> np.ndarray:
    arr = np.empty(len(values), dtype=object)
    arr[:] = [int(v) for v in values]
    if n is not None and len(arr) != n:
        raise ValueError(f"expected {n} coefficients, got {len(arr)}")
    return arr


class Poly:
    __slots__ = ("params", "coeffs")

    def __init__(self, params: PolyParams, coeffs):
        self.params = params
        if isinstance(coeffs, np.ndarray) and coeffs.dtype == object:
            c = coeffs
            if len(c) != params.n:
                raise ValueError(f"expected {params.n} coefficients, got {len(c)}")
        else:
            c = _as_object(coeffs, params.n)
        self.coeffs = c % params.q

    @classmethod
    def zero(cls, params: PolyParams) -> "Poly":
        return cls(params, np.zeros(params.n, dtype=np.int64).astype(object))

    @classmethod
    def constant(cls, params: PolyParams, c: int) -> "Poly":
        v = [0] * params.n
        v[0] = c
        return cls(params, v)

    @classmethod
    def monomial(cls, params: PolyParams, degree: int) -> "Poly":
        v = [0] * params.n
        v[degree] = 1
        return cls(params, v)

    def _check(self, other: "Poly"):
        if self.params != other.params:
            raise ValueError(f"parameter mismatch: {self.params} vs {other.params}")

    def __add__(self, other: "Poly") -> "Poly":
        self._check(other)
        return Poly(self.params, self.coeffs + other.coeffs)

    def __sub__(self, other: "Poly") -> "Poly":
        self._check(other)
        return Poly(self.params, self.coeffs - other.coeffs)

    def __neg__(self) -> "Poly":
        return Poly(self.params, -self.coeffs)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Poly):
            return NotImplemented
        return self.params == other.params and all(int(x) == int(y) for x, y in zip(self.coeffs, other.coeffs))

    def __getitem__(self, j):
        return self.coeffs[j]

    def __len__(self) -> int:
        return self.params.n

    def __repr__(self) -> str:
        head = ", ".join(str(int(c)) for c in self.coeffs[:8])
        more = ", ..." if self.params.n > 8 else ""
        return f"Poly(N={self.params.n}, q=2^{self.params.q_bits}, [{head}{more}])"

    def tolist(self) -> list[int]:
        return [int(c) for c in self.coeffs]

    def centered(self) -> np.ndarray:
        q = self.params.q
        half = q >> 1
        c = self.coeffs
        return np.where(c >= half, c - q, c)


def schoolbook_negacyclic(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    """O(N^2) negacyclic product of two object coefficient vectors."""
    n = len(a)
    full = np.convolve(a, b)
    out = full[:n].copy()
    out[: n - 1] -= full[n:]
    return out % q


def _center(c: np.ndarray, q: int) -> np.ndarray:
    half = q >> 1
    return np.where(c >= half, c - q, c)


def _limbs(c: np.ndarray, width: int, count: int) -> list[np.ndarray]:
    mask = (1 << width) - 1
    out = []
    for i in range(count - 1):
        out.append(((c >> (width * i)) & mask).astype(np.float64))
    # the top limb keeps the sign (Python >> floors)
    out.append((c >> (width * (count - 1))).astype(np.float64))
    return out


def _bitlen(c: np.ndarray) -> int:
    return max((abs(int(v)).bit_length() for v in c), default=0)


def _limb_width(abits: int, bbits: int, n: int, budget_bits: int = 44) -> int:
    """Widest limb keeping every partial convolution below 2^budget_bits."""
    for width in range(64, 0, -1):
        la = -(-(abits + 1) // width)
        lb = -(-(bbits + 1) // width)
        bound = min(la, lb) * n << (min(width, abits + 1) + min(width, bbits + 1))
        if bound.bit_length() <= budget_bits:
            return width
    return 1


def _fft_negacyclic(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray | None:
    n = len(a)
    ac, bc = _center(a, q), _center(b, q)
    abits, bbits = _bitlen(ac), _bitlen(bc)
    if abits == 0 or bbits == 0:
        return np.zeros(n, dtype=np.int64).astype(object)
    width = _limb_width(abits, bbits, n)
    la = -(-(abits + 1) // width)
    lb = -(-(bbits + 1) // width)
    size = 2 * n
    fa = [np.fft.rfft(x, size) for x in _limbs(ac, width, la)]
    fb = [np.fft.rfft(x, size) for x in _limbs(bc, width, lb)]
    total = np.zeros(n, dtype=np.int64).astype(object)
    for p in range(la + lb - 1):
        acc = None
        for i in range(max(0, p - lb + 1), min(la, p + 1)):
            term = fa[i] * fb[p - i]
            acc = term if acc is None else acc + term
        conv = np.fft.irfft(acc, size)[: 2 * n - 1]
        rounded = np.rint(conv)
        if np.max(np.abs(conv - rounded), initial=0.0) > 0.25:
            return None
        r = rounded.astype(np.int64)
        folded = r[:n].copy()
        folded[: n - 1] -= r[n:]
        total = total + (folded.astype(object) << (width * p))
    return total % q


def negacyclic_mul(a: Poly, b: Poly, method: str = "auto") -> Poly:
    """a * b mod (X^N + 1, q)."""
    a._check(b)
    q = a.params.q
    if method == "schoolbook" or (method == "auto" and a.params.n <= FFT_THRESHOLD):
        return Poly(a.params, schoolbook_negacyclic(a.coeffs, b.coeffs, q))
    if method not in ("auto", "fft"):
        raise ValueError(f"unknown method {method!r}")
    out = _fft_negacyclic(a.coeffs, b.coeffs, q)
    if out is None:  # rounding check failed; fall back to the exact path
        out = schoolbook_negacyclic(a.coeffs, b.coeffs, q)
    return Poly(a.params, out)


def scalar_mul(c: int, a: Poly) -> Poly:
    return Poly(a.params, a.coeffs * int(c))


def monomial_shift(a: Poly, steps: int) -> Poly:
    """a * X^steps: coefficients move up, wrapped ones are negated."""
    n = a.params.n
    if not 0 <= steps < n:
        raise ValueError(f"shift must be in [0, {n}), got {steps}")
    if steps == 0:
        return Poly(a.params, a.coeffs.copy())
    c = a.coeffs
    out = np.concatenate([-c[n - steps:], c[: n - steps]])
    return Poly(a.params, out)
