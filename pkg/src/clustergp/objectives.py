"""Objective functions and adapters.

The synthetic registry collects the closed-form test functions used across the
experiment suite, each with its search box, direction, and (when known) the
exact optimum so result statistics can be computed.  Adapters wrap recorded
lookup tables, shell commands, and additive Gaussian noise as objectives with
the same surface.
"""

from __future__ import annotations

import math
import subprocess
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .errors import ConfigError, EvaluationError
from .space import DimensionSpec, SearchSpace, box


@dataclass(frozen=True)
class KnownOptimum:
    """The exact optimum: value, attaining point(s) or a distance rule, and
    the tolerance at which the value claim is tested."""

    value: float
    points: tuple[tuple[float, ...], ...] | None = None
    distance: Callable[[np.ndarray], float] | None = None
    tolerance: float = 1e-9

    def distance_to(self, x) -> float:
        """Distance from x to the nearest optimal point, in raw coordinates."""
        x = np.asarray(x, dtype=float)
        if self.distance is not None:
            return float(self.distance(x))
        if not self.points:
            raise ConfigError("optimum has neither points nor a distance rule")
        return min(float(np.linalg.norm(x - np.asarray(p))) for p in self.points)


@dataclass(frozen=True)
class Objective:
    """A black box to optimize: evaluator, direction, space, optional optimum."""

    name: str
    evaluate: Callable[[np.ndarray], float]
    direction: str
    space: SearchSpace
    known_optimum: KnownOptimum | None = None

    def __post_init__(self):
        if self.direction not in ("maximize", "minimize"):
            raise ConfigError(f"direction must be maximize or minimize, got {self.direction!r}")


# ---------------------------------------------------------------------------
# synthetic registry
# ---------------------------------------------------------------------------

def _f0(x) -> float:
    # x^(3/2) * sin(1/x), continuous but not differentiable approaching 0
    v = float(x[0])
    if v <= 0.0:
        return 0.0
    return v ** 1.5 * math.sin(1.0 / v)


def _f1(x) -> float:
    v = float(x[0])
    return -v + 1.0 if v < 0.0 else v * v


def _f2(x) -> float:
    r = float(np.linalg.norm(x))
    return (r - 1.0) if r > 1.0 else (r - 1.0) ** 4


def _f3(x) -> float:
    return 1.0 / (1.0 + (x[0] - 0.25) ** 2 + (x[1] - 0.25) ** 2)


def _f4(x) -> float:
    if x[1] > 0.0:
        return _f3(x)
    return 0.25 / (1.0 + x[0] ** 2 + x[1] ** 2)


def _bukin_n6(x) -> float:
    return 100.0 * math.sqrt(abs(x[1] - 0.01 * x[0] ** 2)) + 0.01 * abs(x[0] + 10.0)


def _easom(x) -> float:
    return -math.cos(x[0]) * math.cos(x[1]) * math.exp(-((x[0] - math.pi) ** 2 + (x[1] - math.pi) ** 2))


def _michalewicz(x) -> float:
    total = 0.0
    for i, v in enumerate(x, start=1):
        total += math.sin(v) * math.sin(i * v * v / math.pi) ** 20
    return -total


def _schaffer_n2(x) -> float:
    a = math.sin(x[0] ** 2 - x[1] ** 2) ** 2 - 0.5
    b = (1.0 + 0.001 * (x[0] ** 2 + x[1] ** 2)) ** 2
    return 0.5 + a / b


def _holder_table(x) -> float:
    inner = math.sin(x[0]) * math.cos(x[1]) * math.exp(abs(1.0 - math.hypot(x[0], x[1]) / math.pi))
    return -abs(inner)


def _cross_in_tray(x) -> float:
    inner = math.sin(x[0]) * math.sin(x[1]) * math.exp(abs(100.0 - math.hypot(x[0], x[1]) / math.pi))
    return -0.0001 * (abs(inner) + 1.0) ** 0.1


def _piston(x) -> float:
    # seven-parameter piston cycle time simulator
    M, S, V0, k, P0, Ta, T0 = (float(v) for v in x)
    A = P0 * S + 19.62 * M - k * V0 / S
    V = S / (2.0 * k) * (math.sqrt(A * A + 4.0 * k * (P0 * V0 / T0) * Ta) - A)
    return 2.0 * math.pi * math.sqrt(M / (k + S * S * (P0 * V0 / T0) * (Ta / (V * V))))


_PISTON_SPACE = SearchSpace(dims=(
    DimensionSpec(30.0, 60.0),        # piston mass M (kg)
    DimensionSpec(0.005, 0.020),      # surface area S (m^2)
    DimensionSpec(0.002, 0.010),      # initial gas volume V0 (m^3)
    DimensionSpec(1000.0, 5000.0),    # spring constant k (N/m)
    DimensionSpec(90000.0, 110000.0), # atmospheric pressure P0 (N/m^2)
    DimensionSpec(290.0, 296.0),      # ambient temperature Ta (K)
    DimensionSpec(340.0, 360.0),      # filling gas temperature T0 (K)
))


def _registry() -> dict[str, Objective]:
    return {
        "f0": Objective(
            "f0", _f0, "minimize", box((0.0, 1.0)),
        ),
        "f1": Objective(
            "f1", _f1, "minimize", box((-1.0, 1.0)),
            KnownOptimum(0.0, points=((0.0,),)),
        ),
        "f2": Objective(
            "f2", _f2, "minimize", box((-2.0, 2.0), (-2.0, 2.0)),
            KnownOptimum(0.0, distance=lambda x: abs(np.linalg.norm(x) - 1.0)),
        ),
        "f3": Objective(
            "f3", _f3, "maximize", box((-1.0, 1.0), (-1.0, 1.0)),
            KnownOptimum(1.0, points=((0.25, 0.25),)),
        ),
        "f4": Objective(
            "f4", _f4, "maximize", box((-1.0, 1.0), (-1.0, 1.0)),
            KnownOptimum(1.0, points=((0.25, 0.25),)),
        ),
        "bukin_n6": Objective(
            "bukin_n6", _bukin_n6, "minimize", box((-15.0, 5.0), (-3.0, 3.0)),
            KnownOptimum(0.0, points=((-10.0, 1.0),)),
        ),
        "easom": Objective(
            "easom", _easom, "minimize", box((-10.0, 10.0), (-10.0, 10.0)),
            KnownOptimum(-1.0, points=((math.pi, math.pi),)),
        ),
        "michalewicz": Objective(
            "michalewicz", _michalewicz, "minimize", box((0.0, 4.0), (0.0, 4.0)),
            KnownOptimum(-1.8013, points=((2.20, 1.57),), tolerance=1e-3),
        ),
        "schaffer_n2": Objective(
            "schaffer_n2", _schaffer_n2, "minimize", box((-2.0, 2.0), (-2.0, 2.0)),
            KnownOptimum(0.0, points=((0.0, 0.0),)),
        ),
        "holder_table": Objective(
            "holder_table", _holder_table, "minimize", box((-10.0, 10.0), (-10.0, 10.0)),
            KnownOptimum(-19.2085, tolerance=1e-3, points=tuple(
                (sx * 8.05502, sy * 9.66459) for sx in (1, -1) for sy in (1, -1)
            )),
        ),
        "cross_in_tray": Objective(
            "cross_in_tray", _cross_in_tray, "minimize", box((-10.0, 10.0), (-10.0, 10.0)),
            KnownOptimum(-2.06261218, tolerance=1e-4, points=tuple(
                (sx * 1.3494, sy * 1.3494) for sx in (1, -1) for sy in (1, -1)
            )),
        ),
        "piston": Objective(
            "piston", _piston, "maximize", _PISTON_SPACE,
        ),
    }


def synthetic(name: str) -> Objective:
    """Look up a synthetic objective by registry name."""
    registry = _registry()
    if name not in registry:
        raise ConfigError(f"unknown objective {name!r}; known: {', '.join(sorted(registry))}")
    return registry[name]


def synthetic_names() -> tuple[str, ...]:
    return tuple(sorted(_registry()))


# ---------------------------------------------------------------------------
# regime-structured integer benchmark
# ---------------------------------------------------------------------------

_MATMUL_PEAK = 2010.702
_MATMUL_PEAK_AT = 112


def _matmul_like(x) -> float:
    """Throughput-shaped curve over block sizes 1..1000 with three regimes.

    Regime one rises steeply to a peak at 112 and falls toward a plateau;
    regime two (from 160) is a slowly declining plateau; regime three (from
    500) drops again toward a constant floor.  A ripple rewards multiples of
    8 throughout, and the curve jumps downward across regime cuts.
    """
    b = int(round(float(x[0])))
    ripple = math.cos(math.pi * (b % 8) / 4.0)
    if b < 160:
        s = (b / _MATMUL_PEAK_AT) ** 2 * math.exp(2.0 * (1.0 - b / _MATMUL_PEAK_AT))
        return _MATMUL_PEAK - 1400.0 * (1.0 - s) - 10.702 * (1.0 - ripple)
    if b < 500:
        return 1750.0 - 0.3 * (b - 160) + 6.0 * ripple
    return 1100.0 + 450.0 * math.exp(-(b - 500) / 60.0) + 4.0 * ripple


def matmul_like() -> Objective:
    """Integer block-size tuning stand-in with a known sharp optimum."""
    return Objective(
        "matmul_like", _matmul_like, "maximize",
        box((1, 1000), kind="integer"),
        KnownOptimum(_MATMUL_PEAK, points=((float(_MATMUL_PEAK_AT),),), tolerance=1e-9),
    )


# ---------------------------------------------------------------------------
# adapters
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ReplayTable:
    """Recorded evaluations keyed by lattice point; lookups must hit exactly."""

    space: SearchSpace
    table: dict[tuple[float, ...], float]

    def lookup(self, raw) -> float:
        key = tuple(self.space.quantize(raw))
        if key not in self.table:
            raise EvaluationError(f"no recorded evaluation at {key}")
        return self.table[key]


def load_replay(path: str, space: SearchSpace) -> ReplayTable:
    """Read a replay table from delimited text with header x0..x{d-1},y."""
    expected = [f"x{i}" for i in range(space.d)] + ["y"]
    table: dict[tuple[float, ...], float] = {}
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        names = [c.strip() for c in header.split(",")]
        if names != expected:
            raise ConfigError(f"replay header must be {','.join(expected)}, got {header!r}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != space.d + 1:
                raise ConfigError(f"replay line {lineno} has {len(parts)} fields, expected {space.d + 1}")
            try:
                values = [float(p) for p in parts]
            except ValueError as exc:
                raise ConfigError(f"replay line {lineno}: {exc}") from exc
            raw = np.array(values[:-1])
            key = tuple(space.quantize(raw))
            if not np.allclose(raw, key, atol=1e-9):
                raise ConfigError(f"replay line {lineno}: point {raw.tolist()} is off the space lattice")
            table[key] = values[-1]
    if not table:
        raise ConfigError(f"replay table {path} holds no evaluations")
    return ReplayTable(space=space, table=table)


def replay(table: ReplayTable, direction: str = "maximize") -> Objective:
    """Tune against recorded evaluations only."""
    best = max(table.table.values()) if direction == "maximize" else min(table.table.values())
    points = tuple(k for k, v in table.table.items() if v == best)
    return Objective(
        "replay", table.lookup, direction, table.space,
        KnownOptimum(best, points=points),
    )


def with_noise(objective: Objective, sd: float, rng: np.random.Generator) -> Objective:
    """Add independent Gaussian observation noise to every evaluation."""
    if sd < 0:
        raise ConfigError("noise sd must be nonnegative")
    if sd == 0:
        return objective

    def noisy(x) -> float:
        return float(objective.evaluate(x)) + float(rng.normal(0.0, sd))

    return replace(objective, name=f"{objective.name}+noise", evaluate=noisy)


def external_command(template: str, space: SearchSpace, timeout: float = 60.0,
                     direction: str = "maximize") -> Objective:
    """Objective that shells out: placeholders {x0}..{x{d-1}} are substituted,
    the final line of stdout is parsed as the response."""
    for i in range(space.d):
        if f"{{x{i}}}" not in template:
            raise ConfigError(f"command template is missing placeholder {{x{i}}}")
    if f"{{x{space.d}}}" in template:
        raise ConfigError(f"command template names {{x{space.d}}} beyond the {space.d} dimensions")

    def run(x) -> float:
        values = {}
        for i, (dim, v) in enumerate(zip(space.dims, x)):
            v = float(v)
            values[f"x{i}"] = str(int(v)) if v == int(v) else repr(v)
        cmd = template.format(**values)
        try:
            proc = subprocess.run(
                cmd, shell=True, capture_output=True, text=True, timeout=timeout,
            )
        except subprocess.TimeoutExpired as exc:
            raise EvaluationError(f"command timed out after {timeout}s: {cmd}") from exc
        if proc.returncode != 0:
            tail = (proc.stderr or proc.stdout).strip().splitlines()[-3:]
            raise EvaluationError(f"command exited {proc.returncode}: {cmd!r}; output tail: {tail}")
        lines = [ln for ln in proc.stdout.strip().splitlines() if ln.strip()]
        if not lines:
            raise EvaluationError(f"command produced no stdout: {cmd!r}")
        try:
            return float(lines[-1].strip())
        except ValueError as exc:
            raise EvaluationError(f"last stdout line {lines[-1]!r} is not a number") from exc

    return Objective("command", run, direction, space)


def objective_by_name(name: str) -> Objective:
    """Resolve a CLI-facing objective name: the synthetic registry plus matmul_like."""
    if name == "matmul_like":
        return matmul_like()
    return synthetic(name)
