"""Track how many components the surrogate keeps while tuning a block size.

The synthetic throughput curve has three performance regimes; clustering with
a Dirichlet mixture lets the model learn how many it needs.  Prints the mean
component count at a few checkpoints along the run plus the final best values.
"""

import argparse
import os

import numpy as np

from clustergp.harness import BatchConfig, read_trace, run_batch, write_report


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--budget", type=int, default=100)
    ap.add_argument("--pilot", type=int, default=10)
    ap.add_argument("--kmax", type=int, default=3)
    ap.add_argument("--out", default="regime_out")
    args = ap.parse_args()

    checkpoints = tuple(c for c in (10, 30, 50, 70, 90, 190) if c <= args.budget - args.pilot)
    config = BatchConfig(
        objective="matmul_like",
        budget=args.budget,
        pilot=args.pilot,
        seeds=tuple(range(args.seeds)),
        checkpoints=checkpoints,
        variants={"cgp-dgm": {"clustering": f"dgm:{args.kmax}"}},
    )
    run_batch(config, args.out)
    write_report(args.out)

    with open(os.path.join(args.out, "components.csv")) as fh:
        print(fh.read())

    bests = []
    for seed in config.seeds:
        records = read_trace(os.path.join(args.out, "cgp-dgm", f"trace_{seed}.csv"))
        bests.append(records[-1].best_y)
    bests = np.asarray(bests)
    print(f"best theoretical rate 2010.702 at block size 112")
    print(f"mean best over seeds: {bests.mean():.3f}")
    print(f"seeds reaching the top plateau (>= 2000): {(bests >= 2000.0).mean():.0%}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
