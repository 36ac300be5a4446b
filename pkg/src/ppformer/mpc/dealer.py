"""Trusted-dealer simulation of the ideal two-party functionalities.

Both parties submit their inputs for call number ``seq``; once the pair is
complete the dealer reconstructs, evaluates in the clear and hands back fresh
shares. The evaluation functions are pure in their inputs and the dealer RNG,
so they are also usable directly on share pairs in tests.

Truncation inside ``mul`` is exact: the ring product is read as a signed
value and shifted with floor rounding. This keeps protocol outputs
bit-identical to the plaintext fixed-point reference.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from ..fixed_ring import RingParams, RingTensor, to_signed, uniform_residues
from .sharing import BoolShare, Party, ShareTensor
from .transcript import ProtocolError

__all__ = ["Dealer", "ProtocolAborted", "Public", "ideal"]


class ProtocolAborted(RuntimeError):
    pass


@dataclass(frozen=True)
class Public:
    """A public integer operand (already at the right scale), identical on both sides."""

    value: int


def _split(values, params: RingParams, rng: np.random.Generator) -> tuple[ShareTensor, ShareTensor]:
    v = RingTensor(params, values)
    r = RingTensor(params, uniform_residues(rng, params.ell, v.shape))
    return ShareTensor(Party.CLIENT, r), ShareTensor(Party.SERVER, v - r)


def _split_bits(bits: np.ndarray, rng: np.random.Generator) -> tuple[BoolShare, BoolShare]:
    bits = np.asarray(bits, dtype=np.uint8)
    r = rng.integers(0, 2, size=bits.shape, dtype=np.uint8)
    return BoolShare(Party.CLIENT, r), BoolShare(Party.SERVER, r ^ bits)


def _open(pair) -> np.ndarray:
    """Signed plaintext of a share pair as Python ints (object array)."""
    c, s = pair
    ell = c.params.ell
    v = (c.inner + s.inner).data
    return to_signed(v, ell).astype(object)


class _Ideal:
    """Pure functionality evaluations on (client, server) input pairs."""

    @staticmethod
    def mul(a, b, rng, trunc: int = 0):
        ca, _ = a
        cb, _ = b
        if ca.params.ell != cb.params.ell:
            raise ValueError("mul operands live in different rings")
        ell = ca.params.ell
        x, y = _open(a), _open(b)
        half = 1 << (ell - 1)
        # ring product, read back as signed, then an exact arithmetic shift
        prod = ((x * y + half) % (1 << ell)) - half
        if trunc:
            prod = prod >> trunc
        scale = min(max(ca.params.scale + cb.params.scale - trunc, 0), ell - 1)
        return _split(np.asarray(prod, dtype=object), RingParams(ell, scale), rng)

    @staticmethod
    def less(a, b, rng):
        ell = next(p[0].params.ell for p in (a, b) if not isinstance(p, Public))
        top = 1 << (ell - 1)

        def biased(p):
            # flipping the top bit maps signed order onto unsigned order
            if isinstance(p, Public):
                return (int(p.value) % (1 << ell)) ^ top
            c, s = p
            return (c.inner + s.inner).data.astype(object) ^ top

        return _split_bits(np.asarray(biased(a) < biased(b), dtype=np.uint8), rng)

    @staticmethod
    def b2a(bits, rng, ell: int, scale: int = 0, embed: int = 0):
        c, s = bits
        v = (c.bits ^ s.bits).astype(object) << embed
        return _split(v, RingParams(ell, scale), rng)

    @staticmethod
    def wrap(a, rng):
        c, s = a
        ell = c.params.ell
        total = c.inner.data.astype(object) + s.inner.data.astype(object)
        return _split_bits(np.asarray(total >= (1 << ell), dtype=np.uint8), rng)

    @staticmethod
    def recip(a, rng, out_scale: int):
        c, _ = a
        x = _open(a)
        if np.any(x <= 0):
            raise ValueError("reciprocal input must be positive")
        num = 1 << (c.params.scale + out_scale)
        # round half up: floor((2*num + x) / (2*x))
        r = np.vectorize(lambda v: (2 * num + v) // (2 * v), otypes=[object])(x)
        return _split(r, RingParams(c.params.ell, out_scale), rng)


ideal = _Ideal()


class Dealer:
    """Rendezvous point for functionality calls from the two party threads."""

    def __init__(self, seed=None):
        self.rng = np.random.default_rng(seed)
        self._cv = threading.Condition()
        self._pending: dict[int, dict[Party, tuple]] = {}
        self._results: dict[int, dict[Party, object]] = {}
        self._abort: BaseException | None = None
        self.calls: list[str] = []

    def abort(self, exc: BaseException | None = None):
        with self._cv:
            self._abort = exc or ProtocolAborted("peer aborted")
            self._cv.notify_all()

    def call(self, party: Party, seq: int, name: str, inputs: tuple, params: dict, timeout: float = 600.0):
        with self._cv:
            if self._abort is not None:
                raise ProtocolAborted(f"aborted before {name}#{seq}") from self._abort
            slot = self._pending.setdefault(seq, {})
            slot[party] = (name, inputs, params)
            if len(slot) == 2:
                try:
                    self._evaluate(seq)
                finally:
                    self._cv.notify_all()
            ok = self._cv.wait_for(lambda: seq in self._results or self._abort is not None, timeout)
            if self._abort is not None and seq not in self._results:
                raise ProtocolAborted(f"aborted during {name}#{seq}") from self._abort
            if not ok:
                raise ProtocolAborted(f"peer never joined {name}#{seq}")
            res = self._results[seq]
            out = res.pop(party)
            if not res:
                del self._results[seq]
            return out

    def _evaluate(self, seq: int):
        slot = self._pending.pop(seq)
        (nc, ic, pc), (ns, is_, ps) = slot[Party.CLIENT], slot[Party.SERVER]
        if nc != ns or pc != ps:
            err = ProtocolError(f"functionality call {seq} mismatch: {nc}{pc} vs {ns}{ps}")
            self._abort = err
            raise err
        pairs = tuple(
            x if isinstance(x, Public) else (x, y) for x, y in zip(ic, is_)
        )
        try:
            out_c, out_s = getattr(ideal, nc)(*pairs, self.rng, **pc)
        except Exception as e:
            self._abort = e
            raise
        self.calls.append(nc)
        self._results[seq] = {Party.CLIENT: out_c, Party.SERVER: out_s}
