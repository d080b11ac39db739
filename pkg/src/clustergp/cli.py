"""Command-line autotuner: tune one objective, run benchmark batches, report.

tune   one optimization run; writes a trace file and the resolved config
bench  a batch of (variant, seed) runs from a JSON batch config
report stats tables regenerated from a batch output directory

Exit status is 0 on success and nonzero on configuration errors or runs where
every evaluation failed.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ConfigError, DomainError, EvaluationError, NumericError
from .harness import (
    BatchConfig,
    load_batch_config,
    run_batch,
    write_report,
)
from .space import SearchSpace


def _load_space_config(path: str) -> tuple:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"space file {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, list) or not data:
        raise ConfigError("space file must hold a nonempty list of dimension specs")
    SearchSpace.from_config(data)  # validate eagerly
    return tuple(data)


def _add_tune_parser(sub) -> None:
    p = sub.add_parser("tune", help="run one optimization")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--objective", help="name from the synthetic registry")
    src.add_argument("--replay", metavar="FILE", help="recorded evaluation table")
    src.add_argument("--command", metavar="TEMPLATE",
                     help="shell template with {x0}.. placeholders; last stdout line is y")
    p.add_argument("--space", metavar="FILE",
                   help="JSON list of dimension specs (replay/command objectives)")
    p.add_argument("--budget", type=int, required=True,
                   help="total evaluations including pilots")
    p.add_argument("--pilot", type=int, default=10, help="pilot sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--direction", choices=("maximize", "minimize"), default=None)
    p.add_argument("--clustering", default="kmeans:3", metavar="METHOD:K",
                   help="kmeans:K or dgm:KMAX")
    p.add_argument("--xi", type=float, default=1.0,
                   help="response weight in the clustering features")
    p.add_argument("--explore", type=float, default=0.8, metavar="TAU",
                   help="probability a sequential sample uses acquisition")
    p.add_argument("--kernel", default="matern32")
    p.add_argument("--min-cluster", type=int, default=None,
                   help="dissolve clusters smaller than this")
    p.add_argument("--partition", default="learned",
                   help="learned, single, or fixed:DIM:T1,T2")
    p.add_argument("--noise", type=float, default=0.0, metavar="SD",
                   help="additive Gaussian observation noise")
    p.add_argument("--out", default="tune_out", metavar="DIR")


def _add_bench_parser(sub) -> None:
    p = sub.add_parser("bench", help="run a benchmark batch")
    p.add_argument("--config", required=True, metavar="FILE", help="batch config JSON")
    p.add_argument("--out", required=True, metavar="DIR")


def _add_report_parser(sub) -> None:
    p = sub.add_parser("report", help="regenerate stats tables from traces")
    p.add_argument("--in", dest="in_dir", required=True, metavar="DIR",
                   help="directory written by bench or tune")


def _tune(args) -> int:
    if args.objective is not None:
        if args.space is not None:
            raise ConfigError("registry objectives define their own space; drop --space")
        objective_spec: str | dict = args.objective
        space_cfg = None
    else:
        if args.space is None:
            raise ConfigError("replay and command objectives need --space FILE")
        space_cfg = _load_space_config(args.space)
        if args.replay is not None:
            objective_spec = {"replay": args.replay}
        else:
            objective_spec = {"command": args.command}

    overrides = {
        "clustering": args.clustering,
        "xi": args.xi,
        "explore": args.explore,
        "kernel": args.kernel,
        "partition": args.partition,
    }
    if args.min_cluster is not None:
        overrides["min_cluster"] = args.min_cluster

    config = BatchConfig(
        objective=objective_spec,
        budget=args.budget,
        pilot=args.pilot,
        seeds=(args.seed,),
        direction=args.direction,
        noise_sd=args.noise,
        space=space_cfg,
        variants={"tune": overrides},
    )
    results = run_batch(config, args.out)
    result = results["tune"][args.seed]
    failed = sum(1 for r in result.records if r.failed)
    trace = os.path.join(args.out, "tune", f"trace_{args.seed}.csv")
    if result.best_x is None:
        print(f"all {result.evaluations} evaluations failed; trace in {trace}",
              file=sys.stderr)
        return 1
    coords = ", ".join(repr(float(v)) for v in result.best_x)
    print(f"best y = {float(result.best_y)!r} at ({coords})")
    print(f"{result.evaluations} evaluations ({failed} failed), "
          f"final components: {result.records[-1].effective_k}")
    print(f"trace written to {trace}")
    return 0


def _bench(args) -> int:
    config = load_batch_config(args.config)
    results = run_batch(config, args.out)
    total = 0
    for variant, by_seed in results.items():
        bests = [r.best_y for r in by_seed.values() if r.best_x is not None]
        total += len(bests)
        if not bests:
            print(f"{variant}: every run failed completely", file=sys.stderr)
            return 1
        agg = max(bests) if config.direction != "minimize" else min(bests)
        print(f"{variant}: {len(by_seed)} runs, best overall {agg!r}")
    print(f"{total} traces written to {args.out}")
    return 0


def _report(args) -> int:
    written = write_report(args.in_dir)
    for path in written:
        print(path)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="clustergp",
        description="black-box autotuning with a clustered Gaussian process surrogate",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)
    _add_tune_parser(sub)
    _add_bench_parser(sub)
    _add_report_parser(sub)
    args = parser.parse_args(argv)

    try:
        if args.subcommand == "tune":
            return _tune(args)
        if args.subcommand == "bench":
            return _bench(args)
        return _report(args)
    except (ConfigError, DomainError, NumericError, EvaluationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
