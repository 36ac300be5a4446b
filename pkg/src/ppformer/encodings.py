"""Matrix-to-polynomial encodings.

Window encoding packs a k_w x m_w block of X and an m_w x n_w block of W so
that their negacyclic product carries every inner product of the block at
coefficient ``i*m_w*n_w + j*m_w + (m_w - 1)``. Terms that wrap past X^N land
on coefficients ``0..m_w-2``, which are never read.

Row-wise encoding puts one weight row into the low ``n`` coefficients; the
resulting output ciphertexts are packed densely by right shifts of stride n.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fixed_ring import RingParams, RingTensor
from .poly_ring import Poly, PolyParams
from .toy_he import Ciphertext, he_add, he_rshift, plaintext

__all__ = [
    "WindowShape",
    "PackingPlan",
    "window_encode_left",
    "window_encode_right",
    "window_decode",
    "rowwise_encode",
    "pack_outputs",
    "unpack_outputs",
]


@dataclass(frozen=True)
class WindowShape:
    k_w: int
    m_w: int
    n_w: int

    @property
    def volume(self) -> int:
        return self.k_w * self.m_w * self.n_w

    def check(self, n: int):
        if min(self.k_w, self.m_w, self.n_w) < 1:
            raise ValueError("window dimensions must be positive")
        if self.volume > n:
            raise ValueError(f"window {self.k_w}x{self.m_w}x{self.n_w} exceeds N={n}")


@dataclass(frozen=True)
class PackingPlan:
    k: int
    n: int
    poly_n: int

    def __post_init__(self):
        if self.n > self.poly_n:
            raise ValueError(f"row width n={self.n} exceeds N={self.poly_n}")

    @property
    def rows_per_ct(self) -> int:
        return self.poly_n // self.n

    @property
    def shift_stride(self) -> int:
        return self.n

    @property
    def ct_count(self) -> int:
        return -(-self.k // self.rows_per_ct)


def _residues(t: RingTensor) -> list[list[int]]:
    return [[int(v) for v in row] for row in t.data]


def window_encode_left(x: RingTensor, shape: WindowShape, params: PolyParams) -> Poly:
    shape.check(params.n)
    if x.shape != (shape.k_w, shape.m_w):
        raise ValueError(f"expected a {shape.k_w}x{shape.m_w} block, got {x.shape}")
    coeffs = [0] * params.n
    mn = shape.m_w * shape.n_w
    for i, row in enumerate(_residues(x)):
        for j, v in enumerate(row):
            coeffs[i * mn + shape.m_w - 1 - j] = v
    return plaintext(params, coeffs)


def window_encode_right(w: RingTensor, shape: WindowShape, params: PolyParams) -> Poly:
    shape.check(params.n)
    if w.shape != (shape.m_w, shape.n_w):
        raise ValueError(f"expected a {shape.m_w}x{shape.n_w} block, got {w.shape}")
    coeffs = [0] * params.n
    for i, row in enumerate(_residues(w)):
        for j, v in enumerate(row):
            coeffs[j * shape.m_w + i] = v
    return plaintext(params, coeffs)


def window_decode(z: Poly, shape: WindowShape, ring: RingParams) -> RingTensor:
    t = z.params.t
    mn = shape.m_w * shape.n_w
    out = np.empty((shape.k_w, shape.n_w), dtype=object)
    for i in range(shape.k_w):
        for j in range(shape.n_w):
            out[i, j] = int(z.coeffs[i * mn + j * shape.m_w + shape.m_w - 1]) % t
    return RingTensor(ring, out)


def rowwise_encode(row, n: int, params: PolyParams) -> Poly:
    """Weight row in coefficients 0..n-1, zeros above."""
    vals = [int(v) for v in np.asarray(row).ravel()]
    if n > params.n:
        raise ValueError(f"n={n} exceeds N={params.n}")
    if len(vals) != n:
        raise ValueError(f"row has {len(vals)} entries, expected {n}")
    return plaintext(params, vals)


def pack_outputs(cts: list[Ciphertext], plan: PackingPlan) -> list[Ciphertext]:
    """Fold rows_per_ct row ciphertexts into one by right shifts of stride n."""
    if len(cts) != plan.k:
        raise ValueError(f"expected {plan.k} row ciphertexts, got {len(cts)}")
    r = plan.rows_per_ct
    packed = []
    for theta in range(plan.ct_count):
        acc = None
        for slot in range(r):
            alpha = theta * r + slot
            if alpha >= plan.k:
                break  # missing tail rows are zero
            shifted = he_rshift(cts[alpha], slot * plan.shift_stride)
            acc = shifted if acc is None else he_add(acc, shifted)
        packed.append(acc)
    return packed


def unpack_outputs(plaintexts: list[Poly], plan: PackingPlan, ring: RingParams) -> RingTensor:
    if len(plaintexts) != plan.ct_count:
        raise IndexError(f"expected {plan.ct_count} packed plaintexts, got {len(plaintexts)}")
    r = plan.rows_per_ct
    out = np.empty((plan.k, plan.n), dtype=object)
    for alpha in range(plan.k):
        src = plaintexts[alpha // r].coeffs
        base = (alpha % r) * plan.n
        out[alpha, :] = [int(v) for v in src[base:base + plan.n]]
    return RingTensor(ring, out)
