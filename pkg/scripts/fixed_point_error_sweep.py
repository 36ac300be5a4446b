"""Max |fixed - real| of the fitted templates and a degree-6 reference across scales.

For each ring width and scale, evaluates every model with the protocol's
fixed-point Horner arithmetic on a dense sweep and records the worst error
and whether any intermediate overflowed.
"""
import argparse
import csv
import sys
from dataclasses import dataclass

import numpy as np

from ppformer import approx
from ppformer.fixed_ring import RingParams


@dataclass
class SweepConfig:
    ells: tuple = (32, 64)
    scales: tuple = tuple(range(6, 21, 2))
    points: int = 4001
    reference_degree: int = 6


def models(degree: int):
    hg, he = approx.Histogram.synthetic_gelu(), approx.Histogram.synthetic_softmax()
    yield "gelu_template", approx.template_gelu(hg), (-6.0, 4.0)
    yield f"gelu_deg{degree}", approx.reference_poly(approx.gelu, -6.0, 4.0, degree, hg), (-6.0, 4.0)
    yield "exp_template", approx.template_exp(he), (-16.0, 0.0)
    yield f"exp_deg{degree}", approx.reference_poly(np.exp, -16.0, 0.0, degree, he), (-16.0, 0.0)


def sweep(cfg: SweepConfig):
    fitted = list(models(cfg.reference_degree))
    for ell in cfg.ells:
        for s in cfg.scales:
            if s >= ell:
                continue
            for name, model, (lo, hi) in fitted:
                err, ovf = approx.fixed_degradation(model, lo, hi, RingParams(ell, s), cfg.points)
                yield {"ell": ell, "scale": s, "model": name, "max_abs_err": err, "overflow": ovf}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--ells", default="32,64")
    ap.add_argument("--scales", default="6,8,10,12,14,16,18,20")
    ap.add_argument("--points", type=int, default=4001)
    ap.add_argument("--out", help="CSV path (default stdout)")
    args = ap.parse_args(argv)
    cfg = SweepConfig(tuple(int(v) for v in args.ells.split(",")), tuple(int(v) for v in args.scales.split(",")),
                      args.points)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    w = csv.DictWriter(fh, fieldnames=["ell", "scale", "model", "max_abs_err", "overflow"])
    w.writeheader()
    for row in sweep(cfg):
        w.writerow(row)
    if args.out:
        fh.close()


if __name__ == "__main__":
    main()
