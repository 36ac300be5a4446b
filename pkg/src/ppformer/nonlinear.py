"""Secure evaluation of the fitted activations and ring conversion.

Every protocol here is a per-party function ``f(ctx, share, ...)`` run by both
parties on their own share; the ``run_*`` helpers execute a pair of them and
return the reconstructed-ready share pair plus the run transcript.

Piecewise selection follows the templates' interval conventions. A mux is one
batched B2A of the selector bits and one batched F_mul with the branches.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .approx import PiecewisePoly, encode_breakpoints, encode_coeffs, eval_piecewise_fixed
from .fixed_ring import RingParams, RingTensor
from .mpc import BoolShare, Party, PartyContext, ProtocolRun, Public, ShareTensor, run_two_party

__all__ = [
    "SecurePiecewise",
    "public_share",
    "secure_gelu",
    "secure_exp",
    "secure_softmax",
    "secure_row_max",
    "trunc_upcast",
    "signed_trunc_upcast",
    "secure_truncate",
    "run_shared",
    "SharedResult",
]

NONLINEAR_RING = RingParams(32, 12)


@dataclass(frozen=True)
class SecurePiecewise:
    """Fixed-point form of a fitted template.

    ``coeffs`` are rounded to ``params.scale``, leading coefficient
    first (the Horner order); ``thresholds`` are the encoded breakpoints.
    """

    kind: str  # "gelu" or "exp"
    params: RingParams
    coeffs: tuple[int, ...]
    thresholds: tuple[int, ...]
    source: PiecewisePoly

    @classmethod
    def from_piecewise(cls, p: PiecewisePoly, params: RingParams = NONLINEAR_RING,
                       check_range: tuple[float, float] | None = None) -> "SecurePiecewise":
        kinds = tuple(piece.kind for piece in p.pieces)
        if kinds == ("zero", "poly", "identity") and p.closed == "right":
            kind, poly = "gelu", p.pieces[1]
        elif kinds == ("zero", "poly") and p.closed == "left":
            kind, poly = "exp", p.pieces[1]
        else:
            raise ValueError(f"unsupported piece layout {kinds} ({p.closed}-closed)")
        s = params.scale
        coeffs = tuple(encode_coeffs(poly.coeffs, s))
        sp = cls(kind, params, coeffs, tuple(encode_breakpoints(p, s)), p)
        if check_range is None:
            check_range = (-8.0, 8.0) if kind == "gelu" else (-16.0, 0.0)
        lo, hi = check_range
        sweep = np.arange(int(np.floor(lo * (1 << s))), int(np.floor(hi * (1 << s))) + 1, max(1, (1 << s) // 64))
        if sp.oracle(sweep).overflow:
            raise OverflowError(f"{kind} template overflows ell={params.ell} at scale {s} on [{lo}, {hi}]")
        return sp

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def oracle(self, x_signed):
        """Plaintext fixed-point evaluation with the protocol's arithmetic."""
        return eval_piecewise_fixed(self.source, np.asarray(x_signed, dtype=object), self.params)


def public_share(party: Party, value, shape, params: RingParams) -> ShareTensor:
    """Trivial sharing of a public value: the server holds it, the client holds 0."""
    t = RingTensor.zeros(params, *shape)
    if party == Party.SERVER:
        t = t.add_const(value)
    return ShareTensor(party, t)


def _check_ring(x: ShareTensor, sp: SecurePiecewise):
    if x.params != sp.params:
        raise ValueError(f"input ring {x.params} does not match the template ring {sp.params}")


def _horner(ctx: PartyContext, x: ShareTensor, sp: SecurePiecewise) -> ShareTensor:
    s = sp.params.scale
    # the leading coefficient stays inside F_mul (server-held input)
    acc = public_share(ctx.party, sp.coeffs[0], x.shape, sp.params)
    for b in sp.coeffs[1:]:
        acc = ctx.f_mul(acc, x, trunc=s, label="poly").add_public(b)
    return acc


def _mux(ctx: PartyContext, bits: list, branches: list[ShareTensor], ell: int, embed: int) -> ShareTensor:
    """sum_i bit_i * branch_i in one B2A batch and one F_mul batch."""
    cols = branches[0].shape[1]
    sel_bits = BoolShare(ctx.party, np.concatenate([b.bits for b in bits], axis=1))
    sel = ctx.f_b2a(sel_bits, ell=ell, scale=embed, embed=embed, label="mux")
    data = np.concatenate([br.inner.data for br in branches], axis=1)
    stacked = ShareTensor(ctx.party, RingTensor(branches[0].params, data))
    prod = ctx.f_mul(sel, stacked, trunc=0, label="mux")
    out = prod.inner.data[:, :cols]
    for i in range(1, len(branches)):
        out = out + prod.inner.data[:, i * cols:(i + 1) * cols]
    return ShareTensor(ctx.party, RingTensor(prod.params, out))


def secure_gelu(ctx: PartyContext, x: ShareTensor, sp: SecurePiecewise, mux_scale: int = 0) -> ShareTensor:
    """0 for x <= T1, P2(x) on (T1, T2], x above T2.

    The output scale is ``s + mux_scale``: selector bits enter the mux as
    ``bit * 2^mux_scale``, which lets a caller fold a later rescale into it.
    """
    if sp.kind != "gelu":
        raise ValueError("secure_gelu needs a gelu template")
    _check_ring(x, sp)
    a2 = _horner(ctx, x, sp)
    t1, t2 = sp.thresholds
    b0 = ctx.f_less(Public(t1), x, label="cmp").invert()  # 1{x <= T1}
    b1 = ctx.f_less(Public(t2), x, label="cmp")  # 1{x > T2}
    z1 = (b0 ^ b1).invert()  # middle interval; the constant is applied by one party only
    return _mux(ctx, [z1, b1], [a2, x], sp.params.ell, mux_scale)


def secure_exp(ctx: PartyContext, x: ShareTensor, sp: SecurePiecewise, mux_scale: int = 0) -> ShareTensor:
    """0 for x < T, P3(x) for x >= T (x <= 0 after max subtraction)."""
    if sp.kind != "exp":
        raise ValueError("secure_exp needs an exp template")
    _check_ring(x, sp)
    a3 = _horner(ctx, x, sp)
    (t,) = sp.thresholds
    z0 = ctx.f_less(x, Public(t), label="cmp")  # 1{x < T}
    return _mux(ctx, [z0.invert()], [a3], sp.params.ell, mux_scale)


def secure_row_max(ctx: PartyContext, x: ShareTensor) -> ShareTensor:
    """Row maxima by a balanced tournament; ties keep the lower index."""
    cur = x.inner.data
    params = x.params
    while cur.shape[1] > 1:
        pairs = cur.shape[1] // 2
        a = ShareTensor(ctx.party, RingTensor(params, cur[:, 0:2 * pairs:2]))
        b = ShareTensor(ctx.party, RingTensor(params, cur[:, 1:2 * pairs:2]))
        bit = ctx.f_less(a, b, label="max")
        sel = ctx.f_b2a(bit, ell=params.ell, label="max")
        m = a + ctx.f_mul(sel, b - a, trunc=0, label="max").with_params(params)
        cur = np.concatenate([m.inner.data, cur[:, 2 * pairs:]], axis=1)
    return ShareTensor(ctx.party, RingTensor(params, cur))


def secure_softmax(ctx: PartyContext, x: ShareTensor, sp: SecurePiecewise) -> ShareTensor:
    """Row-wise softmax: max shift, secure exp, local sum, F_recip, F_mul."""
    _check_ring(x, sp)
    s = sp.params.scale
    mx = secure_row_max(ctx, x)
    shifted = x - ShareTensor(ctx.party, RingTensor(x.params, np.repeat(mx.inner.data, x.shape[1], axis=1)))
    e = secure_exp(ctx, shifted, sp)
    total = ShareTensor(ctx.party, RingTensor(e.params, e.inner.data.sum(axis=1, keepdims=True)))
    inv = ctx.f_recip(total, out_scale=s, label="softmax")
    inv_b = ShareTensor(ctx.party, RingTensor(inv.params, np.repeat(inv.inner.data, x.shape[1], axis=1)))
    return ctx.f_mul(e, inv_b, trunc=s, label="softmax")


# --- truncation and ring conversion ------------------------------------------

def _shift_share(ctx: PartyContext, data: np.ndarray, s: int, mode: str) -> np.ndarray:
    out = data >> np.uint64(s)
    if mode == "ceil" and ctx.party == Party.SERVER:
        # rounding the server's share up turns the -1 carry error into a +1
        out = out + ((data & np.uint64((1 << s) - 1)) != 0).astype(np.uint64)
    return out


def _wrap_truncate(ctx: PartyContext, x: ShareTensor, s: int, ell_big: int, mode: str) -> ShareTensor:
    ell = x.params.ell
    if not 0 < s < ell:
        raise ValueError(f"shift must be in (0, {ell}), got {s}")
    if mode not in ("ceil", "floor"):
        raise ValueError("mode must be 'ceil' or 'floor'")
    w_bits = ctx.f_wrap(x, label="trunc")
    width = ell_big - ell + s
    w = ctx.f_b2a(w_bits, ell=width, label="trunc")
    shifted = _shift_share(ctx, x.inner.data, s, mode).astype(object)
    y = (shifted - (w.inner.data.astype(object) << (ell - s))) % (1 << ell_big)
    out = RingParams(ell_big, max(x.params.scale - s, 0))
    return ShareTensor(ctx.party, RingTensor(out, y))


def trunc_upcast(ctx: PartyContext, x: ShareTensor, s: int, ell_big: int, mode: str = "ceil") -> ShareTensor:
    """Fused truncation by ``s`` and extension from Z_{2^ell} to Z_{2^ell_big}.

    For an unsigned secret x the result reconstructs to floor(x / 2^s) or one
    more. ``mode="floor"`` shifts both shares down instead, which yields
    floor(x / 2^s) or one less.
    """
    if ell_big <= x.params.ell:
        raise ValueError("trunc_upcast needs ell_big > ell")
    return _wrap_truncate(ctx, x, s, ell_big, mode)


def signed_trunc_upcast(ctx: PartyContext, x: ShareTensor, s: int, ell_big: int, mode: str = "ceil") -> ShareTensor:
    """trunc_upcast for two's-complement secrets |x| < 2^(ell-1) - 2^s."""
    ell = x.params.ell
    biased = x.add_public(1 << (ell - 1))
    y = trunc_upcast(ctx, biased, s, ell_big, mode)
    return y.add_public(-(1 << (ell - 1 - s)))


def secure_truncate(ctx: PartyContext, x: ShareTensor, s: int, mode: str = "ceil") -> ShareTensor:
    """Signed truncation by ``s`` inside the same ring (wrap-corrected shift)."""
    ell = x.params.ell
    biased = x.add_public(1 << (ell - 1))
    y = _wrap_truncate(ctx, biased, s, ell, mode)
    return y.add_public(-(1 << (ell - 1 - s)))


# --- two-party drivers --------------------------------------------------------

@dataclass
class SharedResult:
    yc: ShareTensor
    ys: ShareTensor
    run: ProtocolRun

    def reconstruct(self) -> RingTensor:
        from .mpc import reconstruct

        return reconstruct(self.yc, self.ys)


def run_shared(fn: Callable[..., ShareTensor], xc: ShareTensor, xs: ShareTensor, *, seed: int = 0,
               transport: str = "inproc", **kw) -> SharedResult:
    """Run ``fn(ctx, share, **kw)`` on both parties' shares."""
    run = run_two_party(lambda ctx: fn(ctx, xc, **kw), lambda ctx: fn(ctx, xs, **kw), seed=seed, transport=transport)
    return SharedResult(run.client, run.server, run)
