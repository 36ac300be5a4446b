"""Ciphertext counts for SIP and COP on BERT-base layer shapes.

Prints formula counts at N=8192 and, with --verify, runs COP on each shape
(inner dimension reduced, which the output count does not depend on) and
checks the transcript against the formula.
"""
import argparse
import csv
import sys
from dataclasses import dataclass

import numpy as np

from ppformer.encodings import WindowShape
from ppformer.fixed_ring import RingTensor
from ppformer.linear import PRESETS, LinearLayerSpec, cop_counts, cop_matmul, sip_counts
from ppformer.mpc import share


@dataclass
class Config:
    poly_n: int = 8192
    window: tuple = (16, 16, 32)
    verify: bool = False
    reduced_m: int = 2
    seed: int = 0


def rows(cfg: Config):
    for name, (k, m, n) in PRESETS.items():
        spec = LinearLayerSpec(k, m, n, poly_n=cfg.poly_n)
        sip = sip_counts(spec, WindowShape(*cfg.window))
        cop = cop_counts(spec)
        row = {"layer": name, "k": k, "m": m, "n": n,
               "sip_in": sip["ct_in"], "sip_out": sip["ct_out"], "sip_total": sip["ct_in"] + sip["ct_out"],
               "cop_in": cop["ct_in"], "cop_out": cop["ct_out"], "cop_total": cop["ct_in"] + cop["ct_out"]}
        if cfg.verify:
            small = LinearLayerSpec(k, cfg.reduced_m, n, poly_n=cfg.poly_n)
            rng = np.random.default_rng([cfg.seed, k, n])
            x = RingTensor.random(small.ring, k, small.m, rng)
            w = RingTensor.random(small.ring, small.m, n, rng)
            xc, xs = share(x, rng)
            tr = cop_matmul(xc, xs, w, small, seed=cfg.seed).run.transcript
            row["measured_cop_out"] = tr.ct_out
            row["measured_rounds"] = tr.rounds
        yield row


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=8192)
    ap.add_argument("--window", default="16,16,32", help="SIP window k_w,m_w,n_w")
    ap.add_argument("--verify", action="store_true")
    ap.add_argument("--out", help="CSV path (default stdout)")
    args = ap.parse_args(argv)
    cfg = Config(args.N, tuple(int(v) for v in args.window.split(",")), args.verify)
    table = list(rows(cfg))
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(fh, fieldnames=list(table[0]))
    w.writeheader()
    w.writerows(table)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
