"""Run the toy block over several seeds and both transports; write a CSV report."""
import argparse
import time
from dataclasses import replace

from ppformer.block import BlockConfig, run_block
from ppformer.report import rows_for_run, write_report


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--N", type=int, default=1024)
    ap.add_argument("--out", default="block_runs.csv")
    args = ap.parse_args(argv)
    rows = []
    for seed in range(args.seeds):
        sigs = {}
        for transport in ("inproc", "tcp"):
            cfg = replace(BlockConfig(), seed=seed, poly_n=args.N, transport=transport)
            t0 = time.perf_counter()
            res = run_block(cfg)
            wall = (time.perf_counter() - t0) * 1e3
            sigs[transport] = res.run.transcript.signature()
            for r in rows_for_run(f"online/{transport}/seed{seed}", res.run, wall, res.max_err):
                rows.append(r)
        same = sigs["inproc"] == sigs["tcp"]
        print(f"seed {seed}: max_err {res.max_err:.3e}, transcripts {'identical' if same else 'DIFFER'}")
    write_report(rows, args.out)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
