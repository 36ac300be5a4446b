"""Command-line harness: ``ppformer {matmul,fit,nonlinear,block}``.

Exit codes: 0 success, 2 verification failure, 3 noise budget exceeded,
4 transport error.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from . import approx
from .block import BlockConfig, run_block
from .encodings import WindowShape
from .fixed_ring import RingParams, RingTensor, ring_matmul
from .linear import PRESETS, LinearLayerSpec, cop_counts, cop_matmul, sip_counts, sip_matmul
from .mpc import TransportError, share
from .nonlinear import SecurePiecewise, run_shared, secure_exp, secure_gelu, secure_softmax
from .report import REPORT_COLUMNS, ReportRow, load_tensor, rows_for_run, save_tensor, write_report
from .toy_he import NoiseBudgetExceeded

__all__ = ["main", "RunConfig", "EXIT_OK", "EXIT_VERIFY", "EXIT_NOISE", "EXIT_TRANSPORT"]

EXIT_OK = 0
EXIT_VERIFY = 2
EXIT_NOISE = 3
EXIT_TRANSPORT = 4

log = logging.getLogger("ppformer")


class VerificationError(RuntimeError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    k: int = 8
    m: int = 16
    n: int = 16
    preset: str | None = None
    poly_n: int = 1024
    ell: int = 64
    scale: int = 18
    protocol: str = "cop"
    window: tuple[int, int, int] | None = None
    transport: str = "inproc"
    seed: int = 0
    report: str | None = None
    verify: bool = True
    extra: dict = field(default_factory=dict)


def _window(text: str) -> tuple[int, int, int]:
    parts = [int(v) for v in text.replace("x", ",").split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("window must be k_w,m_w,n_w")
    return tuple(parts)


def _auto_window(spec: LinearLayerSpec) -> WindowShape:
    """Largest power-of-two window with k_w*m_w*n_w <= N, filling m first."""
    budget = spec.poly_n
    dims = []
    for d in (spec.m, spec.n, spec.k):
        w = 1
        while w * 2 <= min(d, budget):
            w *= 2
        if w < d and w * 2 <= budget:
            w *= 2
        w = min(w, budget)
        dims.append(w)
        budget //= w
    m_w, n_w, k_w = dims
    return WindowShape(k_w, m_w, n_w)


def _write(rows: list[ReportRow], path: str | None):
    if path:
        write_report(rows, path)
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=REPORT_COLUMNS)
        w.writeheader()
        w.writerows(asdict(r) for r in rows)


# --- subcommands --------------------------------------------------------------

def cmd_matmul(cfg: RunConfig) -> list[ReportRow]:
    if cfg.preset:
        k, m, n = PRESETS[cfg.preset]
        m = cfg.extra.get("reduce_m") or m
    else:
        k, m, n = cfg.k, cfg.m, cfg.n
    spec = LinearLayerSpec(k, m, n, cfg.ell, cfg.scale, cfg.poly_n)
    rng = np.random.default_rng([cfg.seed, 1])
    ring = spec.ring
    x = RingTensor.random(ring, k, m, rng)
    w = RingTensor.random(ring, m, n, rng)
    xc, xs = share(x, rng)
    t0 = time.perf_counter()
    if cfg.protocol == "cop":
        res = cop_matmul(xc, xs, w, spec, seed=cfg.seed, transport=cfg.transport)
        expected = cop_counts(spec)
    elif cfg.protocol == "sip":
        shape = WindowShape(*cfg.window) if cfg.window else _auto_window(spec)
        res = sip_matmul(xc, xs, w, spec, shape, seed=cfg.seed, transport=cfg.transport)
        expected = sip_counts(spec, shape)
    else:
        raise ValueError(f"unknown protocol {cfg.protocol!r}")
    wall = (time.perf_counter() - t0) * 1e3
    got = res.reconstruct()
    oracle = ring_matmul(x, w)
    mismatches = int(np.count_nonzero(got.data != oracle.data))
    tr = res.run.transcript
    rows = []
    if res.setup is not None:
        rows += rows_for_run("setup", res.setup, 0.0)
    rows += rows_for_run("online", res.run, wall, float(mismatches))
    log.info("%s k=%d m=%d n=%d N=%d: ct_in=%d ct_out=%d rounds=%d mismatches=%d",
             cfg.protocol, k, m, n, cfg.poly_n, tr.ct_in, tr.ct_out, tr.rounds, mismatches)
    if cfg.verify:
        if mismatches:
            raise VerificationError(f"{mismatches} output entries differ from the plaintext oracle")
        if tr.ct_in != expected["ct_in"] or tr.ct_out != expected["ct_out"]:
            raise VerificationError(f"ciphertext counts {tr.ct_in}/{tr.ct_out} differ from formula {expected}")
    return rows


def _load_hist(args) -> approx.Histogram:
    if args.hist:
        return approx.Histogram.load(args.hist)
    return approx.Histogram.synthetic_gelu() if args.template == "gelu" else approx.Histogram.synthetic_softmax()


def cmd_fit(args) -> list[dict]:
    template = approx.TEMPLATES[args.template]
    hist = _load_hist(args)
    init = tuple(args.init) if args.init else template.init
    model = approx.search_breakpoints(template.target, template, init, hist, args.radius, args.step)
    if args.out:
        approx.save_model(model, args.out)
    lo, hi = (-6.0, 4.0) if args.template == "gelu" else (-16.0, 0.0)
    ring = RingParams(32, 12)
    deg, overflow = approx.fixed_degradation(model, lo, hi, ring)
    table = [{
        "template": args.template,
        "breakpoints": " ".join(f"{b:.4f}" for b in model.breakpoints),
        "weighted_rmse": approx.weighted_rmse(model, template.target, hist, lo, hi),
        "weighted_loss": model.loss,
        "fixed_max_err": deg,
        "fixed_overflow": overflow,
    }]
    out = open(args.table, "w", newline="", encoding="utf-8") if args.table else sys.stdout
    try:
        w = csv.DictWriter(out, fieldnames=list(table[0]))
        w.writeheader()
        w.writerows(table)
    finally:
        if args.table:
            out.close()
    return table


def cmd_nonlinear(args) -> list[ReportRow]:
    model = approx.load_model(args.model)
    x = load_tensor(args.input)
    sp = SecurePiecewise.from_piecewise(model, x.params)
    fn = {"gelu": secure_gelu, "exp": secure_exp, "softmax": secure_softmax}[args.op]
    rng = np.random.default_rng([args.seed, 1])
    xc, xs = share(x, rng)
    t0 = time.perf_counter()
    res = run_shared(fn, xc, xs, seed=args.seed, transport=args.transport, sp=sp)
    wall = (time.perf_counter() - t0) * 1e3
    y = res.reconstruct()
    if args.op == "softmax":
        xr = x.to_real()
        e = approx.eval_piecewise_real(model, xr - xr.max(axis=1, keepdims=True))
        ref = e / e.sum(axis=1, keepdims=True)
        err = float(np.max(np.abs(y.to_real() - ref)))
    else:
        oracle = sp.oracle(x.signed()).values.astype(np.int64)
        err = float(np.max(np.abs(y.signed() - oracle))) / (1 << x.params.scale) if y.rows else 0.0
    if args.output:
        save_tensor(y, args.output)
    if args.verify and args.op != "softmax" and err > 2.0 / (1 << x.params.scale):
        raise VerificationError(f"secure {args.op} differs from the fixed-point oracle by {err}")
    return rows_for_run("online", res.run, wall, err)


def cmd_block(args) -> list[ReportRow]:
    cfg = BlockConfig(rows=args.rows, cols=args.cols, out=args.out_cols, poly_n=args.N, seed=args.seed,
                      transport=args.transport)
    t0 = time.perf_counter()
    res = run_block(cfg)
    wall = (time.perf_counter() - t0) * 1e3
    rows = rows_for_run("setup", res.setup, 0.0) + rows_for_run("online", res.run, wall, res.max_err)
    if args.verify and res.max_err > 2.0 ** -8:
        raise VerificationError(f"block output error {res.max_err} exceeds 2^-8")
    if args.compare_transports:
        other = "tcp" if not cfg.transport.startswith("tcp") else "inproc"
        alt = run_block(BlockConfig(**{**cfg.__dict__, "transport": other}))
        if alt.run.transcript.signature() != res.run.transcript.signature():
            raise VerificationError(f"transcripts differ between {cfg.transport} and {other}")
    return rows


# --- argument parsing ---------------------------------------------------------

def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--transport", default="inproc", help="inproc or tcp[:port]")
    p.add_argument("--report", help="CSV report path (default: stdout)")
    p.add_argument("--no-verify", dest="verify", action="store_false", help="skip oracle checks")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ppformer", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("matmul", help="run SIP or COP and check it against the plaintext product")
    _common(p)
    p.add_argument("--protocol", choices=("sip", "cop"), default="cop")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--preset", choices=sorted(PRESETS))
    p.add_argument("--reduce-m", type=int, default=None,
                   help="with --preset, use this inner dimension (counts do not depend on m)")
    p.add_argument("--N", type=int, default=1024, help="polynomial degree")
    p.add_argument("--full", action="store_true", help="use N=8192")
    p.add_argument("--ell", type=int, default=64)
    p.add_argument("--scale", type=int, default=18)
    p.add_argument("--window", type=_window, help="SIP window k_w,m_w,n_w")

    p = sub.add_parser("fit", help="fit a piecewise template by breakpoint search")
    p.add_argument("--template", choices=sorted(approx.TEMPLATES), required=True)
    p.add_argument("--hist", help="histogram file ('lower upper count' lines); default synthetic")
    p.add_argument("--init", type=float, nargs="+")
    p.add_argument("--radius", type=float, default=0.5)
    p.add_argument("--step", type=float, default=0.05)
    p.add_argument("--out", help="model file to write")
    p.add_argument("--table", help="error table CSV (default: stdout)")

    p = sub.add_parser("nonlinear", help="evaluate a fitted model securely on a tensor")
    _common(p)
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--op", choices=("gelu", "exp", "softmax"), required=True)
    p.add_argument("--output")

    p = sub.add_parser("block", help="COP linear + GELU toy block across rings")
    _common(p)
    p.add_argument("--rows", type=int, default=8)
    p.add_argument("--cols", type=int, default=16)
    p.add_argument("--out-cols", type=int, default=16)
    p.add_argument("--N", type=int, default=1024)
    p.add_argument("--compare-transports", action="store_true",
                   help="rerun on the other transport and require identical transcripts")
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "matmul":
            cfg = RunConfig("matmul", args.k, args.m, args.n, args.preset, 8192 if args.full else args.N,
                            args.ell, args.scale, args.protocol, args.window, args.transport, args.seed,
                            args.report, args.verify, {"reduce_m": args.reduce_m})
            _write(cmd_matmul(cfg), args.report)
        elif args.command == "fit":
            cmd_fit(args)
        elif args.command == "nonlinear":
            _write(cmd_nonlinear(args), args.report)
        elif args.command == "block":
            _write(cmd_block(args), args.report)
    except VerificationError as e:
        log.error("verification failed: %s", e)
        return EXIT_VERIFY
    except NoiseBudgetExceeded as e:
        log.error("noise budget exceeded: %s", e)
        return EXIT_NOISE
    except (TransportError, ConnectionError) as e:
        log.error("transport error: %s", e)
        return EXIT_TRANSPORT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
