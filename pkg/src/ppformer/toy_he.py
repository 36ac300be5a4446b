"""Symmetric additive RLWE encryption with tracked noise bounds.

NOT secure at any parameter set: there is no public key, no noise flooding
and q is a power of two chosen for exact plaintext scaling. The scheme exists
to exercise the homomorphic operation set used by the linear-layer protocols
(add, plaintext add/sub, polynomial multiply, scalar multiply, right shift)
with bit-exact decryption.

Ciphertexts satisfy ``b = a*s + delta*m + e (mod q)``; ``noise_bound`` is a
proven upper bound on ``max |e|``. Plaintext scalars and polynomials are
lifted to their centered representatives before multiplying, so a negative
fixed-point value costs its magnitude, not ``t`` minus it.
"""
from __future__ import annotations

import contextlib
import contextvars
import struct
from dataclasses import dataclass, field

import numpy as np

from .poly_ring import Poly, PolyParams, monomial_shift, negacyclic_mul

__all__ = [
    "NoiseBudgetExceeded",
    "SecretKey",
    "Ciphertext",
    "OpCounter",
    "counting",
    "op_counters",
    "plaintext",
    "keygen",
    "encrypt",
    "decrypt",
    "he_add",
    "he_add_plain",
    "he_sub_plain",
    "he_poly_mul",
    "he_scalar_mul",
    "he_rshift",
    "measure_noise",
    "serialize_ciphertext",
    "deserialize_ciphertext",
    "FRESH_NOISE",
    "ciphertext_nbytes",
]

FRESH_NOISE = 8


class NoiseBudgetExceeded(RuntimeError):
    pass


@dataclass
class OpCounter:
    """Homomorphic operation tallies for one party.

    ``coeff_mults`` counts one multiplication per plaintext slot for a
    scalar-ciphertext product (N per call) and N^2 for a schoolbook
    polynomial-ciphertext product.
    """

    scalar_mults: int = 0
    poly_mults: int = 0
    coeff_mults: int = 0
    additions: int = 0
    rshifts: int = 0
    encryptions: int = 0
    decryptions: int = 0

    def as_dict(self) -> dict[str, int]:
        return dict(self.__dict__)

    def reset(self):
        for k in self.__dict__:
            setattr(self, k, 0)


_counter: contextvars.ContextVar[OpCounter | None] = contextvars.ContextVar("he_op_counter", default=None)


@contextlib.contextmanager
def counting(counter: OpCounter | None = None):
    counter = counter if counter is not None else OpCounter()
    token = _counter.set(counter)
    try:
        yield counter
    finally:
        _counter.reset(token)


def op_counters() -> dict[str, int]:
    c = _counter.get()
    return c.as_dict() if c is not None else OpCounter().as_dict()


def _tick(**kw):
    c = _counter.get()
    if c is None:
        return
    for k, v in kw.items():
        setattr(c, k, getattr(c, k) + v)


@dataclass(frozen=True)
class SecretKey:
    s: Poly

    @property
    def params(self) -> PolyParams:
        return self.s.params


@dataclass(frozen=True)
class Ciphertext:
    b: Poly
    a: Poly
    noise_bound: int = FRESH_NOISE
    level_scale: int = field(default=0, compare=False)

    @property
    def params(self) -> PolyParams:
        return self.b.params

    def budget_ok(self) -> bool:
        return self.noise_bound < self.params.delta // 2


def plaintext(params: PolyParams, values) -> Poly:
    """Plaintext polynomial with coefficients reduced mod t (zero padded to N)."""
    vals = [int(v) % params.t for v in values]
    if len(vals) > params.n:
        raise ValueError(f"{len(vals)} plaintext slots exceed N={params.n}")
    return Poly(params, vals + [0] * (params.n - len(vals)))


def _check_plain(m: Poly):
    t = m.params.t
    if any(int(c) >= t for c in m.coeffs):
        raise ValueError("plaintext coefficient out of range [0, t)")


def _lift(c: int, t: int) -> int:
    c = int(c)
    return c - t if c >= t >> 1 else c


def _uniform_poly(params: PolyParams, rng: np.random.Generator) -> Poly:
    cb = params.coeff_bytes
    buf = rng.bytes(params.n * cb)
    mask = params.q - 1
    return Poly(params, [int.from_bytes(buf[i * cb:(i + 1) * cb], "little") & mask for i in range(params.n)])


def keygen(params: PolyParams, seed=None) -> SecretKey:
    rng = np.random.default_rng(seed)
    s = rng.integers(-1, 2, size=params.n)
    return SecretKey(Poly(params, s))


def encrypt(m: Poly, sk: SecretKey, rng: np.random.Generator) -> Ciphertext:
    params = sk.params
    if m.params != params:
        raise ValueError("plaintext parameters do not match the key")
    _check_plain(m)
    a = _uniform_poly(params, rng)
    e = rng.binomial(2 * FRESH_NOISE, 0.5, size=params.n) - FRESH_NOISE
    b = Poly(params, negacyclic_mul(a, sk.s).coeffs + params.delta * m.coeffs + e.astype(object))
    _tick(encryptions=1)
    return Ciphertext(b, a, FRESH_NOISE)


def _phase(ct: Ciphertext, sk: SecretKey) -> Poly:
    return ct.b - negacyclic_mul(ct.a, sk.s)


def decrypt(ct: Ciphertext, sk: SecretKey) -> Poly:
    params = ct.params
    if not ct.budget_ok():
        raise NoiseBudgetExceeded(f"noise bound {ct.noise_bound} >= delta/2 = {params.delta // 2}")
    v = _phase(ct, sk).coeffs
    shift = params.q_bits - params.t_bits
    m = (((v + params.delta // 2) % params.q) >> shift) % params.t
    _tick(decryptions=1)
    return Poly(params, m)


def measure_noise(ct: Ciphertext, sk: SecretKey, m: Poly) -> int:
    """max |b - a*s - delta*m| (centered), given the true plaintext m."""
    params = ct.params
    e = Poly(params, _phase(ct, sk).coeffs - params.delta * m.coeffs)
    return max(abs(int(v)) for v in e.centered())


def _checked(ct: Ciphertext, check_budget: bool) -> Ciphertext:
    if check_budget and not ct.budget_ok():
        raise NoiseBudgetExceeded(f"noise bound {ct.noise_bound} >= delta/2")
    return ct


def he_add(ct1: Ciphertext, ct2: Ciphertext, check_budget: bool = False) -> Ciphertext:
    if ct1.params != ct2.params:
        raise ValueError("ciphertext parameter mismatch")
    _tick(additions=1)
    out = Ciphertext(ct1.b + ct2.b, ct1.a + ct2.a, ct1.noise_bound + ct2.noise_bound,
                     max(ct1.level_scale, ct2.level_scale))
    return _checked(out, check_budget)


def he_add_plain(ct: Ciphertext, r: Poly) -> Ciphertext:
    _check_plain(r)
    params = ct.params
    return Ciphertext(Poly(params, ct.b.coeffs + params.delta * r.coeffs), ct.a, ct.noise_bound, ct.level_scale)


def he_sub_plain(ct: Ciphertext, r: Poly) -> Ciphertext:
    _check_plain(r)
    params = ct.params
    return Ciphertext(Poly(params, ct.b.coeffs - params.delta * r.coeffs), ct.a, ct.noise_bound, ct.level_scale)


def he_poly_mul(p: Poly, ct: Ciphertext, check_budget: bool = False) -> Ciphertext:
    """Plaintext-polynomial times ciphertext; decrypts to p*m mod (X^N+1, t)."""
    _check_plain(p)
    params = ct.params
    t = params.t
    lifted = Poly(params, [_lift(c, t) for c in p.coeffs])
    mag = max(abs(_lift(c, t)) for c in p.coeffs)
    _tick(poly_mults=1, coeff_mults=params.n * params.n)
    out = Ciphertext(
        negacyclic_mul(ct.b, lifted),
        negacyclic_mul(ct.a, lifted),
        ct.noise_bound * max(1, params.n * mag),
        ct.level_scale,
    )
    return _checked(out, check_budget)


def he_scalar_mul(c: int, ct: Ciphertext, check_budget: bool = False) -> Ciphertext:
    params = ct.params
    c = int(c)
    if not 0 <= c < params.t:
        raise ValueError("scalar out of range [0, t)")
    cl = _lift(c, params.t)
    _tick(scalar_mults=1, coeff_mults=params.n)
    out = Ciphertext(Poly(params, ct.b.coeffs * cl), Poly(params, ct.a.coeffs * cl),
                     ct.noise_bound * abs(cl), ct.level_scale)
    return _checked(out, check_budget)


def he_rshift(ct: Ciphertext, steps: int) -> Ciphertext:
    """Multiply the plaintext by X^steps; a coefficient permutation, noise unchanged."""
    _tick(rshifts=1)
    return Ciphertext(monomial_shift(ct.b, steps), monomial_shift(ct.a, steps), ct.noise_bound, ct.level_scale)


_HEADER = struct.Struct("<IHH")


def serialize_ciphertext(ct: Ciphertext) -> bytes:
    params = ct.params
    cb = params.coeff_bytes
    if ct.noise_bound >= 1 << (8 * cb):
        raise ValueError("noise bound does not fit the header field")
    parts = [_HEADER.pack(params.n, params.q_bits, params.t_bits), int(ct.noise_bound).to_bytes(cb, "little")]
    parts.extend(int(c).to_bytes(cb, "little") for c in ct.b.coeffs)
    parts.extend(int(c).to_bytes(cb, "little") for c in ct.a.coeffs)
    return b"".join(parts)


def ciphertext_nbytes(params: PolyParams) -> int:
    return _HEADER.size + params.coeff_bytes * (2 * params.n + 1)


def deserialize_ciphertext(buf: bytes, offset: int = 0) -> tuple[Ciphertext, int]:
    """Parse one ciphertext at ``offset``; returns it and the next offset."""
    n, q_bits, t_bits = _HEADER.unpack_from(buf, offset)
    params = PolyParams(n, q_bits, t_bits)
    cb = params.coeff_bytes
    pos = offset + _HEADER.size
    end = pos + cb * (2 * n + 1)
    if end > len(buf):
        raise ValueError("truncated ciphertext")
    noise = int.from_bytes(buf[pos:pos + cb], "little")
    pos += cb
    coeffs = [int.from_bytes(buf[pos + i * cb: pos + (i + 1) * cb], "little") for i in range(2 * n)]
    return Ciphertext(Poly(params, coeffs[:n]), Poly(params, coeffs[n:]), noise), end
