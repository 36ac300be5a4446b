"""Additive arithmetic shares over Z_{2^ell} and XOR shares of bits."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..fixed_ring import RingParams, RingTensor, uniform_residues

__all__ = ["Party", "ShareTensor", "BoolShare", "share", "reconstruct", "share_bits", "reconstruct_bits"]


class Party(enum.IntEnum):
    CLIENT = 0
    SERVER = 1

    @property
    def other(self) -> "Party":
        return Party(1 - self)


@dataclass
class ShareTensor:
    party: Party
    inner: RingTensor

    @property
    def params(self) -> RingParams:
        return self.inner.params

    @property
    def shape(self):
        return self.inner.shape

    def _wrap(self, t: RingTensor) -> "ShareTensor":
        return ShareTensor(self.party, t)

    def __add__(self, other: "ShareTensor") -> "ShareTensor":
        return self._wrap(self.inner + other.inner)

    def __sub__(self, other: "ShareTensor") -> "ShareTensor":
        return self._wrap(self.inner - other.inner)

    def __neg__(self) -> "ShareTensor":
        return self._wrap(-self.inner)

    def add_public(self, value) -> "ShareTensor":
        """Add a public constant (scalar residue or RingTensor); only the server's share moves."""
        if self.party != Party.SERVER:
            return self._wrap(self.inner.copy())
        if isinstance(value, RingTensor):
            return self._wrap(self.inner + value)
        return self._wrap(self.inner.add_const(value))

    def mul_public(self, c: int) -> "ShareTensor":
        return self._wrap(self.inner.mul_const(c))

    def with_params(self, params: RingParams) -> "ShareTensor":
        return self._wrap(RingTensor(params, self.inner.data))


@dataclass
class BoolShare:
    party: Party
    bits: np.ndarray

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8) & 1

    def __xor__(self, other: "BoolShare") -> "BoolShare":
        return BoolShare(self.party, self.bits ^ other.bits)

    def xor_public(self, bit) -> "BoolShare":
        """XOR with a public bit (scalar or array); applied by the server only."""
        if self.party != Party.SERVER:
            return BoolShare(self.party, self.bits.copy())
        return BoolShare(self.party, self.bits ^ np.asarray(bit, dtype=np.uint8))

    def invert(self) -> "BoolShare":
        return self.xor_public(1)


def share(x: RingTensor, rng: np.random.Generator) -> tuple[ShareTensor, ShareTensor]:
    r = RingTensor(x.params, uniform_residues(rng, x.params.ell, x.shape))
    return ShareTensor(Party.CLIENT, r), ShareTensor(Party.SERVER, x - r)


def reconstruct(a: ShareTensor, b: ShareTensor) -> RingTensor:
    t = a.inner + b.inner
    scale = a.params.scale
    return RingTensor(RingParams(t.params.ell, scale), t.data)


def share_bits(bits: np.ndarray, rng: np.random.Generator) -> tuple[BoolShare, BoolShare]:
    bits = np.asarray(bits, dtype=np.uint8) & 1
    r = rng.integers(0, 2, size=bits.shape, dtype=np.uint8)
    return BoolShare(Party.CLIENT, r), BoolShare(Party.SERVER, r ^ bits)


def reconstruct_bits(a: BoolShare, b: BoolShare) -> np.ndarray:
    return (a.bits ^ b.bits).astype(np.uint8)
