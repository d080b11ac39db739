"""Batch experiment runner, trace persistence, and result statistics.

A batch config names one objective, a seed list, and a set of engine-config
variants.  run_batch writes one trace file per (variant, seed) plus the
resolved config; write_report reads those files back and emits delimited
stats tables.  Reports are regenerated purely from the persisted files, so
rerunning either step reproduces identical bytes.
"""

from __future__ import annotations

import json
import os
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import AcquisitionConfig
from .engine import EngineConfig, RunResult, StepRecord, optimize, substream
from .errors import ConfigError
from .gp import FitConfig
from .objectives import Objective, external_command, load_replay, objective_by_name, replay, with_noise
from .partition import ClusteringSpec
from .space import SearchSpace

_NOISE = 9  # substream tag for observation noise, disjoint from engine tags


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunStats:
    """Result quality of one run against the objective's known truth."""

    best_x: tuple[float, ...] | None
    best_y: float
    delta_argmax: float | None
    delta_max: float | None


def compute_stats(result: RunResult, objective: Objective) -> RunStats:
    """Distance of the best observation from the known optimum, if any."""
    opt = objective.known_optimum
    if opt is None or result.best_x is None:
        return RunStats(result.best_x, result.best_y, None, None)
    delta_max = abs(opt.value - result.best_y)
    delta_argmax = opt.distance_to(np.asarray(result.best_x))
    return RunStats(result.best_x, result.best_y, delta_argmax, delta_max)


def paired_compare(ys_a, ys_b, direction: str) -> tuple[float, float]:
    """Seed-paired comparison of final bests: fraction of seeds where the
    first run is equal-or-better, and strictly better."""
    ys_a = np.asarray(ys_a, dtype=float)
    ys_b = np.asarray(ys_b, dtype=float)
    if ys_a.shape != ys_b.shape or ys_a.ndim != 1 or len(ys_a) == 0:
        raise ConfigError("paired comparison needs two equal-length nonempty sequences")
    if direction == "maximize":
        eq_or_better = ys_a >= ys_b
        better = ys_a > ys_b
    else:
        eq_or_better = ys_a <= ys_b
        better = ys_a < ys_b
    return float(eq_or_better.mean()), float(better.mean())


def effective_k_at(records: tuple[StepRecord, ...], pilot: int, checkpoint: int) -> int | None:
    """Component count recorded at the checkpoint-th sequential sample."""
    idx = pilot + checkpoint - 1
    if idx < 0 or idx >= len(records):
        return None
    return records[idx].effective_k


# ---------------------------------------------------------------------------
# trace files
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    v = float(v)
    return repr(v) if np.isfinite(v) else ""


def write_trace(path: str, result: RunResult) -> None:
    """One row per evaluation; floats as shortest round-trip decimals."""
    if not result.records:
        raise ConfigError("refusing to write an empty trace")
    d = len(result.records[0].raw)
    header = ["step", "source"] + [f"x{i}" for i in range(d)] + [
        "y", "effective_k", "component", "best_y"]
    lines = [",".join(header)]
    for rec in result.records:
        row = [str(rec.step), rec.source]
        row += [_fmt(v) for v in rec.raw]
        row += [_fmt(rec.y), str(rec.effective_k),
                "" if rec.component is None else str(rec.component),
                _fmt(rec.best_y)]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_trace(path: str) -> tuple[StepRecord, ...]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["step", "source"] or header[-4:] != ["y", "effective_k", "component", "best_y"]:
            raise ConfigError(f"unrecognized trace header in {path}")
        d = len(header) - 6
        records = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(header):
                raise ConfigError(f"malformed trace row in {path}: {line!r}")
            raw = tuple(float(p) for p in parts[2:2 + d])
            records.append(StepRecord(
                step=int(parts[0]), source=parts[1], raw=raw,
                y=float(parts[2 + d]) if parts[2 + d] else float("nan"),
                effective_k=int(parts[3 + d]),
                component=int(parts[4 + d]) if parts[4 + d] else None,
                best_y=float(parts[5 + d]) if parts[5 + d] else float("nan"),
            ))
    return tuple(records)


def _best_of(records: tuple[StepRecord, ...]) -> tuple[tuple[float, ...] | None, float]:
    """Recover (best_x, best_y) from a trace without knowing the direction."""
    final = records[-1].best_y
    if not np.isfinite(final):
        return None, float("nan")
    for rec in records:
        if not rec.failed and rec.y == final:
            return rec.raw, rec.y
    raise ConfigError("trace best_y does not match any recorded evaluation")


# ---------------------------------------------------------------------------
# batch config
# ---------------------------------------------------------------------------

def parse_clustering(text: str) -> tuple[str, int]:
    """Parse 'kmeans:K' or 'dgm:KMAX' (count optional, default 3)."""
    parts = text.split(":")
    method = parts[0].strip().lower()
    if method not in ("kmeans", "dgm"):
        raise ConfigError(f"unknown clustering method {parts[0]!r}")
    if len(parts) == 1:
        return method, 3
    if len(parts) != 2:
        raise ConfigError(f"clustering spec {text!r} should look like kmeans:4 or dgm:3")
    try:
        k = int(parts[1])
    except ValueError as exc:
        raise ConfigError(f"bad cluster count in {text!r}") from exc
    return method, k


def make_band_rule(dim: int, thresholds: tuple[float, ...]):
    """Label points by which threshold band raw[dim] falls in."""
    cuts = np.asarray(thresholds, dtype=float)
    if len(cuts) == 0 or np.any(np.diff(cuts) <= 0):
        raise ConfigError("band thresholds must be strictly increasing and nonempty")

    def rule(raw: np.ndarray) -> np.ndarray:
        return np.searchsorted(cuts, raw[:, dim], side="right").astype(int)

    return rule


def parse_partition(text: str):
    """Parse 'learned', 'single', or 'fixed:DIM:T1,T2,...' into (mode, rule)."""
    if text in ("learned", "single"):
        return text, None
    if text.startswith("fixed:"):
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError("fixed partition looks like fixed:DIM:T1,T2")
        try:
            dim = int(parts[1])
            cuts = tuple(float(t) for t in parts[2].split(","))
        except ValueError as exc:
            raise ConfigError(f"bad fixed partition spec {text!r}") from exc
        return "fixed", make_band_rule(dim, cuts)
    if text == "fixed":
        raise ConfigError("fixed partition needs bands, e.g. fixed:0:0.5")
    raise ConfigError(f"unknown partition mode {text!r}")


_VARIANT_KEYS = frozenset({
    "clustering", "xi", "min_cluster", "classifier_k", "kernel", "explore",
    "partition", "boundary_weight", "candidates", "fit_starts", "fit_maxiter",
})


def build_engine_config(pilot: int, budget: int, direction: str,
                        overrides: dict | None = None) -> EngineConfig:
    """Engine config from batch-level settings plus a variant override dict."""
    overrides = dict(overrides or {})
    unknown = set(overrides) - _VARIANT_KEYS
    if unknown:
        raise ConfigError(f"unknown variant keys: {sorted(unknown)}")

    method, k = parse_clustering(overrides.get("clustering", "kmeans:3"))
    clustering = ClusteringSpec(
        method=method, k=k,
        xi=float(overrides.get("xi", 1.0)),
        min_cluster_size=overrides.get("min_cluster"),
    )
    mode, rule = parse_partition(overrides.get("partition", "learned"))
    acquisition = AcquisitionConfig(
        direction=direction,
        candidate_count=int(overrides.get("candidates", 2048)),
        boundary_weight=float(overrides.get("boundary_weight", 0.0)),
    )
    fit = FitConfig(
        starts=int(overrides.get("fit_starts", 5)),
        maxiter=int(overrides.get("fit_maxiter", 60)),
    )
    return EngineConfig(
        clustering=clustering,
        classifier_k=int(overrides.get("classifier_k", 3)),
        kernel_family=overrides.get("kernel", "matern32"),
        acquisition=acquisition,
        exploration_rate=float(overrides.get("explore", 0.8)),
        pilot_size=pilot,
        max_samples=budget,
        partition_mode=mode,
        fixed_rule=rule,
        fit=fit,
    )


@dataclass(frozen=True)
class BatchConfig:
    """One objective, several engine variants, a list of seeds."""

    objective: str | dict
    budget: int
    pilot: int = 10
    seeds: tuple[int, ...] = tuple(range(10))
    direction: str | None = None
    noise_sd: float = 0.0
    space: tuple | None = None
    shared_pilot: bool = True
    checkpoints: tuple[int, ...] = ()
    variants: dict[str, dict] = field(default_factory=lambda: {"default": {}})

    def __post_init__(self):
        if self.budget < 1 or self.pilot < 1 or self.budget < self.pilot:
            raise ConfigError("need budget >= pilot >= 1")
        if not self.seeds:
            raise ConfigError("need at least one seed")
        if not self.variants:
            raise ConfigError("need at least one variant")
        if self.noise_sd < 0:
            raise ConfigError("noise_sd must be nonnegative")

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "budget": self.budget,
            "pilot": self.pilot,
            "seeds": list(self.seeds),
            "direction": self.direction,
            "noise_sd": self.noise_sd,
            "space": list(self.space) if self.space is not None else None,
            "shared_pilot": self.shared_pilot,
            "checkpoints": list(self.checkpoints),
            "variants": self.variants,
        }


def batch_config_from_dict(data: dict) -> BatchConfig:
    data = dict(data)
    seeds = data.get("seeds", list(range(10)))
    if isinstance(seeds, dict):
        seeds = list(range(int(seeds.get("start", 0)),
                           int(seeds.get("start", 0)) + int(seeds["count"])))
    known = {"objective", "budget", "pilot", "seeds", "direction", "noise_sd",
             "space", "shared_pilot", "checkpoints", "variants"}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown batch config keys: {sorted(unknown)}")
    return BatchConfig(
        objective=data["objective"],
        budget=int(data["budget"]),
        pilot=int(data.get("pilot", 10)),
        seeds=tuple(int(s) for s in seeds),
        direction=data.get("direction"),
        noise_sd=float(data.get("noise_sd", 0.0)),
        space=tuple(data["space"]) if data.get("space") is not None else None,
        shared_pilot=bool(data.get("shared_pilot", True)),
        checkpoints=tuple(int(c) for c in data.get("checkpoints", [])),
        variants={str(k): dict(v) for k, v in data.get("variants", {"default": {}}).items()},
    )


def load_batch_config(path: str) -> BatchConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"batch config {path} is not valid JSON: {exc}") from exc
    return batch_config_from_dict(data)


def resolve_objective(config: BatchConfig) -> Objective:
    """Build the base objective (noise is wrapped per run, not here)."""
    spec = config.objective
    if isinstance(spec, str):
        obj = objective_by_name(spec)
        if config.direction is not None and config.direction != obj.direction:
            obj = replace(obj, direction=config.direction)
        return obj
    if not isinstance(spec, dict):
        raise ConfigError("objective must be a registry name or a table/command dict")
    if "replay" in spec:
        if config.space is None:
            raise ConfigError("replay objectives need an explicit space")
        space = SearchSpace.from_config(config.space)
        table = load_replay(spec["replay"], space)
        return replay(table, direction=config.direction or "maximize")
    if "command" in spec:
        if config.space is None:
            raise ConfigError("command objectives need an explicit space")
        space = SearchSpace.from_config(config.space)
        return external_command(
            spec["command"], space,
            timeout=float(spec.get("timeout", 60.0)),
            direction=config.direction or "maximize",
        )
    raise ConfigError("objective dict must hold a 'replay' or 'command' key")


def variant_seed(base_seed: int, variant: str, shared_pilot: bool) -> int:
    """Engine seed for one (variant, seed) cell.

    Shared pilots reuse the base seed so every variant sees the same pilot
    draws; otherwise the variant name is mixed in.
    """
    if shared_pilot:
        return int(base_seed)
    mix = zlib.crc32(variant.encode("utf-8"))
    return int(np.random.SeedSequence((int(base_seed), mix)).generate_state(1)[0])


def run_one(config: BatchConfig, variant: str, base_seed: int) -> RunResult:
    """Run a single (variant, seed) cell of the batch."""
    if variant not in config.variants:
        raise ConfigError(f"unknown variant {variant!r}")
    objective = resolve_objective(config)
    seed = variant_seed(base_seed, variant, config.shared_pilot)
    if config.noise_sd > 0:
        objective = with_noise(objective, config.noise_sd, substream(seed, _NOISE))
    engine_config = build_engine_config(
        config.pilot, config.budget, objective.direction, config.variants[variant])
    return optimize(objective, objective.space, engine_config, seed)


def run_batch(config: BatchConfig, out_dir: str) -> dict[str, dict[int, RunResult]]:
    """Run every (variant, seed) cell and persist traces plus the config."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "batch_config.json"), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    results: dict[str, dict[int, RunResult]] = {}
    for variant in config.variants:
        vdir = os.path.join(out_dir, variant)
        os.makedirs(vdir, exist_ok=True)
        results[variant] = {}
        for seed in config.seeds:
            result = run_one(config, variant, seed)
            write_trace(os.path.join(vdir, f"trace_{seed}.csv"), result)
            results[variant][seed] = result
    return results


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

def write_report(out_dir: str) -> list[str]:
    """Regenerate stats tables from the persisted traces in out_dir."""
    config = load_batch_config(os.path.join(out_dir, "batch_config.json"))
    objective = resolve_objective(config)
    direction = objective.direction

    traces: dict[str, dict[int, tuple[StepRecord, ...]]] = {}
    for variant in config.variants:
        traces[variant] = {}
        for seed in config.seeds:
            path = os.path.join(out_dir, variant, f"trace_{seed}.csv")
            if not os.path.exists(path):
                raise ConfigError(f"missing trace file {path}")
            traces[variant][seed] = read_trace(path)

    written = []

    stats_lines = ["variant,seed,best_y,delta_argmax,delta_max"]
    summary_lines = ["variant,mean_best_y,mean_delta_argmax,mean_delta_max"]
    for variant in config.variants:
        bests, d_arg, d_max = [], [], []
        for seed in config.seeds:
            records = traces[variant][seed]
            best_x, best_y = _best_of(records)
            fake = RunResult(records=records, best_x=best_x, best_y=best_y,
                             direction=direction, wall_times=())
            st = compute_stats(fake, objective)
            stats_lines.append(",".join([
                variant, str(seed), _fmt(best_y),
                _fmt(st.delta_argmax), _fmt(st.delta_max)]))
            bests.append(best_y)
            if st.delta_argmax is not None:
                d_arg.append(st.delta_argmax)
                d_max.append(st.delta_max)
        summary_lines.append(",".join([
            variant, _fmt(float(np.mean(bests))),
            _fmt(float(np.mean(d_arg)) if d_arg else None),
            _fmt(float(np.mean(d_max)) if d_max else None)]))

    stats_path = os.path.join(out_dir, "stats.csv")
    with open(stats_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(stats_lines) + "\n")
    written.append(stats_path)

    summary_path = os.path.join(out_dir, "summary.csv")
    with open(summary_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(summary_lines) + "\n")
    written.append(summary_path)

    names = list(config.variants)
    if len(names) >= 2:
        paired_lines = ["variant_a,variant_b,n_seeds,equal_or_better,strictly_better"]
        for a in names:
            for b in names:
                if a == b:
                    continue
                ys_a = [_best_of(traces[a][s])[1] for s in config.seeds]
                ys_b = [_best_of(traces[b][s])[1] for s in config.seeds]
                eq, strict = paired_compare(ys_a, ys_b, direction)
                paired_lines.append(",".join([
                    a, b, str(len(config.seeds)), _fmt(eq), _fmt(strict)]))
        paired_path = os.path.join(out_dir, "paired.csv")
        with open(paired_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(paired_lines) + "\n")
        written.append(paired_path)

    comp_lines = ["variant,checkpoint,mean_effective_k"]
    for variant in config.variants:
        for checkpoint in config.checkpoints:
            ks = [effective_k_at(traces[variant][s], config.pilot, checkpoint)
                  for s in config.seeds]
            ks = [k for k in ks if k is not None]
            comp_lines.append(",".join([
                variant, str(checkpoint),
                _fmt(float(np.mean(ks)) if ks else None)]))
        finals = [traces[variant][s][-1].effective_k for s in config.seeds]
        comp_lines.append(",".join([variant, "final", _fmt(float(np.mean(finals)))]))
    comp_path = os.path.join(out_dir, "components.csv")
    with open(comp_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(comp_lines) + "\n")
    written.append(comp_path)

    return written
