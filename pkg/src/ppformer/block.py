"""Toy encoder-block pipeline across the two rings.

COP linear layer in Z_{2^64} at scale 18 (product at scale 36), signed
truncation to scale 12, local downcast to Z_{2^32}, secure GELU whose mux
lifts the result to scale 24, then a fused truncation-upcast by 6 back to
Z_{2^64} at scale 18.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .approx import PiecewisePoly, eval_piecewise_real, template_gelu
from .fixed_ring import RingParams, RingTensor, local_downcast
from .linear import LinearLayerSpec, WeightStore, cop_client, cop_server, cop_setup, transfer_store
from .mpc import PartyContext, ProtocolRun, ShareTensor, reconstruct, run_two_party, share
from .nonlinear import SecurePiecewise, secure_gelu, secure_truncate, signed_trunc_upcast
from .toy_he import keygen

__all__ = ["BlockConfig", "BlockResult", "run_block", "block_party"]

WIDE = RingParams(64, 18)
NARROW = RingParams(32, 12)


@dataclass(frozen=True)
class BlockConfig:
    rows: int = 8
    cols: int = 16
    out: int = 16
    poly_n: int = 1024
    seed: int = 0
    transport: str = "inproc"
    x_range: float = 2.0
    w_std: float = 0.5


@dataclass
class BlockResult:
    output: RingTensor
    reference: np.ndarray
    max_err: float
    run: ProtocolRun
    setup: ProtocolRun
    extras: dict = field(default_factory=dict)


def block_party(ctx: PartyContext, x: ShareTensor, sp: SecurePiecewise, *, store: WeightStore | None = None,
                sk=None, w: RingTensor | None = None, spec: LinearLayerSpec | None = None) -> ShareTensor:
    """One party's script; the client passes ``store``, the server ``sk``, ``w`` and ``spec``."""
    if store is not None:
        y = cop_client(ctx, store, x, WIDE.scale)
    else:
        y = cop_server(ctx, sk, w, x, spec)
    shift = y.params.scale - NARROW.scale
    y = secure_truncate(ctx, y, shift)
    y = ShareTensor(ctx.party, local_downcast(y.inner, NARROW.ell))
    # selector bits at scale 12 put the GELU output at scale 24, above the target 18
    g = secure_gelu(ctx, y, sp, mux_scale=NARROW.scale)
    return signed_trunc_upcast(ctx, g, g.params.scale - WIDE.scale, WIDE.ell)


def run_block(cfg: BlockConfig, model: PiecewisePoly | None = None) -> BlockResult:
    rng = np.random.default_rng([cfg.seed, 100])
    x_real = rng.uniform(-cfg.x_range, cfg.x_range, size=(cfg.rows, cfg.cols))
    w_real = rng.normal(0.0, cfg.w_std, size=(cfg.cols, cfg.out))
    x = RingTensor.from_real(x_real, WIDE)
    w = RingTensor.from_real(w_real, WIDE)
    xc, xs = share(x, rng)

    model = model or template_gelu()
    sp = SecurePiecewise.from_piecewise(model, NARROW)
    spec = LinearLayerSpec(cfg.rows, cfg.cols, cfg.out, WIDE.ell, WIDE.scale, cfg.poly_n)
    sk = keygen(spec.cop_params(), seed=np.random.SeedSequence([cfg.seed, 10]))
    store = cop_setup(w, sk, spec, np.random.default_rng([cfg.seed, 11]))
    client_store, setup = transfer_store(store, transport=cfg.transport, seed=cfg.seed)

    run = run_two_party(
        lambda ctx: block_party(ctx, xc, sp, store=client_store),
        lambda ctx: block_party(ctx, xs, sp, sk=sk, w=w, spec=spec),
        transport=cfg.transport,
        seed=cfg.seed,
    )
    out = reconstruct(run.client, run.server)
    z = x.to_real() @ w.to_real()
    ref = eval_piecewise_real(model, z)
    err = float(np.max(np.abs(out.to_real() - ref)))
    return BlockResult(out, ref, err, run, setup)
