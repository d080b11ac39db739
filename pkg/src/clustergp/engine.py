"""Sequential optimization loop around the clustered surrogate.

The loop draws a pilot batch uniformly at random, then alternates between
acquisition steps (refit the surrogate on everything seen, propose by
size-weighted expected improvement) and plain random steps, gated by the
exploration rate.  All randomness derives from one root seed through named
substreams keyed by step index, so reruns are bit-identical and the single-GP
special case matches clustered mode with one cluster exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .acquisition import AcquisitionConfig, propose_next
from .errors import ConfigError, EvaluationError, NumericError
from .gp import FitConfig, FittedComponent, KernelSpec, build_component, canonical_family, fit_component, predict
from .partition import (
    ClassifierModel,
    ClusteringSpec,
    build_feature_pairs,
    classify_many,
    cluster_dgm,
    cluster_kmeans,
    prune_small_clusters,
)
from .space import SearchSpace

PARTITION_MODES = ("learned", "fixed", "single")

# substream tags: every random decision pulls from its own named stream so
# that consuming one never shifts another
_PILOT = 0
_EXPLORE = 1
_RANDOM = 2
_REFIT = 3
_ACQ = 4


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator for the given (seed, tag, ...) path."""
    entropy = (int(seed),) + tuple(int(p) for p in path)
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


@dataclass(frozen=True)
class EngineConfig:
    """Everything the loop needs apart from the objective and the seed."""

    clustering: ClusteringSpec = field(default_factory=ClusteringSpec)
    classifier_k: int = 3
    kernel_family: str = "matern32"
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    exploration_rate: float = 0.8
    pilot_size: int = 10
    max_samples: int = 100
    partition_mode: str = "learned"
    fixed_rule: Callable[[np.ndarray], np.ndarray] | None = None
    fit: FitConfig = field(default_factory=FitConfig)

    def __post_init__(self):
        canonical_family(self.kernel_family)
        if self.classifier_k < 1:
            raise ConfigError("classifier_k must be at least 1")
        if not 0.0 <= self.exploration_rate <= 1.0:
            raise ConfigError("exploration_rate must lie in [0, 1]")
        if self.pilot_size < 1:
            raise ConfigError("pilot_size must be at least 1")
        if self.max_samples < self.pilot_size:
            raise ConfigError("max_samples must be at least pilot_size")
        if self.partition_mode not in PARTITION_MODES:
            raise ConfigError(f"partition_mode must be one of {PARTITION_MODES}")
        if self.partition_mode == "fixed" and self.fixed_rule is None:
            raise ConfigError("fixed partition mode needs a fixed_rule")


@dataclass(frozen=True)
class KnnClassifier:
    model: ClassifierModel

    def classify_units(self, U) -> np.ndarray:
        return classify_many(self.model, U)


@dataclass(frozen=True)
class RuleClassifier:
    """Labels from a user rule applied to raw (affine, unquantized) coordinates."""

    rule: Callable[[np.ndarray], np.ndarray]
    space: SearchSpace

    def classify_units(self, U) -> np.ndarray:
        U = np.atleast_2d(np.asarray(U, dtype=float))
        raw = self.space.to_raw_affine(U)
        labels = np.asarray(self.rule(raw))
        if labels.shape != (len(U),):
            raise ConfigError(f"fixed rule returned shape {labels.shape}, expected ({len(U)},)")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise ConfigError("fixed rule must return integer labels")
            labels = labels.astype(int)
        if labels.min(initial=0) < 0:
            raise ConfigError("fixed rule labels must be nonnegative")
        return labels.astype(int)


@dataclass(frozen=True)
class ConstantClassifier:
    def classify_units(self, U) -> np.ndarray:
        return np.zeros(len(np.atleast_2d(np.asarray(U, dtype=float))), dtype=int)


@dataclass(frozen=True)
class CgpModel:
    """Additive surrogate: one GP per component plus the labeling rule."""

    components: dict[int, FittedComponent]
    classifier: object
    labels: np.ndarray
    dim: int

    @property
    def effective_k(self) -> int:
        return len(self.components)

    def classify_units(self, U) -> np.ndarray:
        return self.classifier.classify_units(U)


def _fit_with_fallback(X, y, family: str, config: FitConfig, rng) -> FittedComponent:
    """Fit one component; on numerical failure fall back to defaults, flagged."""
    try:
        return fit_component(X, y, family=family, config=config, rng=rng)
    except NumericError:
        pass
    for noise in (1e-2, 1.0):
        try:
            comp = build_component(X, y, KernelSpec(family=family), noise_variance=noise)
            return replace(comp, degenerate=True)
        except NumericError:
            continue
    raise NumericError("component fit failed even with a unit noise floor")


def fit_cgp(X_unit, y_raw, space: SearchSpace, config: EngineConfig,
            rng: np.random.Generator) -> CgpModel:
    """Cluster, prune, classify, and fit one GP per surviving component.

    The two child streams are split off before any mode branching so the
    single-component mode and clustered mode with k=1 consume identical
    randomness for the GP fits.
    """
    X_unit = np.atleast_2d(np.asarray(X_unit, dtype=float))
    y_raw = np.asarray(y_raw, dtype=float)
    n, d = X_unit.shape
    if n < 2:
        raise ConfigError("fitting needs at least two observations")
    if len(y_raw) != n:
        raise ConfigError("inputs and responses disagree in length")

    cluster_rng, fit_root = rng.spawn(2)

    if config.partition_mode == "single":
        labels = np.zeros(n, dtype=int)
        classifier: object = ConstantClassifier()
    elif config.partition_mode == "fixed":
        classifier = RuleClassifier(rule=config.fixed_rule, space=space)
        labels = classifier.classify_units(X_unit)
    else:
        spec = config.clustering
        features = build_feature_pairs(X_unit, y_raw, spec.xi)
        if spec.method == "kmeans":
            labels = cluster_kmeans(features, spec.k, cluster_rng)
        else:
            labels = cluster_dgm(features, spec.k, cluster_rng)
        min_size = spec.min_cluster_size if spec.min_cluster_size is not None else max(2, d + 1)
        labels = prune_small_clusters(labels, features, min_size)
        classifier = KnnClassifier(ClassifierModel(
            train_X=X_unit, train_labels=labels,
            k_neighbors=min(config.classifier_k, n),
        ))

    components: dict[int, FittedComponent] = {}
    for lab in sorted(set(int(v) for v in labels)):
        mask = labels == lab
        comp_rng = fit_root.spawn(1)[0]
        components[lab] = _fit_with_fallback(
            X_unit[mask], y_raw[mask], config.kernel_family, config.fit, comp_rng,
        )
    return CgpModel(components=components, classifier=classifier,
                    labels=np.asarray(labels, dtype=int), dim=d)


def predict_cgp(model: CgpModel, x) -> tuple[float, float, int]:
    """Classify x, then predict from that component alone."""
    x = np.asarray(x, dtype=float).reshape(-1)
    label = int(model.classify_units(x.reshape(1, -1))[0])
    comp = model.components.get(label)
    if comp is None:
        raise NumericError(f"no fitted component for label {label}")
    mean, var = predict(comp, x)
    return mean, var, label


@dataclass(frozen=True)
class StepRecord:
    """One objective evaluation (or one failed attempt)."""

    step: int
    source: str  # pilot | random | acquisition
    raw: tuple[float, ...]
    y: float  # NaN marks a failed evaluation
    effective_k: int
    component: int | None
    best_y: float  # NaN until the first success

    @property
    def failed(self) -> bool:
        return not np.isfinite(self.y)


@dataclass(frozen=True)
class RunResult:
    """Complete record of one optimization run."""

    records: tuple[StepRecord, ...]
    best_x: tuple[float, ...] | None
    best_y: float
    direction: str
    wall_times: tuple[float, ...]

    @property
    def evaluations(self) -> int:
        return len(self.records)

    def observed(self) -> tuple[np.ndarray, np.ndarray]:
        """Successful evaluations as (raw X, y)."""
        good = [r for r in self.records if not r.failed]
        if not good:
            return np.empty((0, 0)), np.empty(0)
        return np.array([r.raw for r in good]), np.array([r.y for r in good])


class Tuner:
    """Ask/tell driver for the sequential loop.

    ask() hands out the next raw point to evaluate; tell(raw, y) records the
    response (tell_failure(raw) records a crash).  Streams are keyed by record
    index, so a rerun that receives the same responses asks the same points.
    """

    def __init__(self, space: SearchSpace, config: EngineConfig, seed: int):
        if int(seed) != seed or seed < 0:
            raise ConfigError("seed must be a nonnegative integer")
        self.space = space
        self.config = config
        self.seed = int(seed)
        self._pilot_rng = substream(self.seed, _PILOT)
        self._records: list[StepRecord] = []
        self._wall: list[float] = []
        self._X_unit: list[np.ndarray] = []
        self._y: list[float] = []
        self._seen: set[tuple[float, ...]] = set()
        self._pending: tuple[np.ndarray, str, int | None] | None = None
        self._pending_t0 = 0.0
        self._model: CgpModel | None = None
        self._last_k = 0

    @property
    def steps_taken(self) -> int:
        return len(self._records)

    @property
    def model(self) -> CgpModel | None:
        return self._model

    def _random_point(self, step: int) -> np.ndarray:
        return substream(self.seed, _RANDOM, step).random(self.space.d)

    def _refit(self, step: int) -> None:
        self._model = fit_cgp(
            np.array(self._X_unit), np.array(self._y), self.space, self.config,
            substream(self.seed, _REFIT, step),
        )
        self._last_k = self._model.effective_k

    def _propose(self, step: int) -> tuple[np.ndarray, str, int | None]:
        """Acquisition proposal with duplicate replacement; random fallback."""
        proposal = propose_next(self._model, self.config.acquisition,
                                substream(self.seed, _ACQ, step))
        if proposal is not None:
            order = np.argsort(-proposal.pool_scores, kind="stable")
            for idx in order:
                if not np.isfinite(proposal.pool_scores[idx]):
                    break
                unit = proposal.pool[idx]
                key = tuple(self.space.denormalize(unit))
                if key not in self._seen:
                    return unit, "acquisition", int(proposal.pool_labels[idx])
        return self._random_point(step), "random", None

    def ask(self) -> np.ndarray:
        if self._pending is not None:
            raise ConfigError("ask() called again before tell()")
        if self.steps_taken >= self.config.max_samples:
            raise ConfigError("budget exhausted")
        step = self.steps_taken
        self._pending_t0 = time.perf_counter()
        if step < self.config.pilot_size:
            unit, source, component = self._pilot_rng.random(self.space.d), "pilot", None
        else:
            u = substream(self.seed, _EXPLORE, step).random()
            if u <= self.config.exploration_rate and len(self._y) >= 2:
                self._refit(step)
                unit, source, component = self._propose(step)
            else:
                unit, source, component = self._random_point(step), "random", None
        raw = self.space.denormalize(unit)
        self._pending = (raw, source, component)
        return raw

    def _append(self, raw: np.ndarray, y: float) -> None:
        pending_raw, source, component = self._pending
        self._pending = None
        raw = self.space.quantize(np.asarray(raw, dtype=float))
        key = tuple(raw)
        self._seen.add(key)
        ok = np.isfinite(y)
        if ok:
            self._X_unit.append(self.space.normalize(raw))
            self._y.append(float(y))
        prev_best = self._records[-1].best_y if self._records else float("nan")
        best = prev_best
        if ok:
            if not np.isfinite(prev_best):
                best = float(y)
            elif self.config.acquisition.direction == "maximize":
                best = max(prev_best, float(y))
            else:
                best = min(prev_best, float(y))
        self._records.append(StepRecord(
            step=len(self._records), source=source, raw=key,
            y=float(y) if ok else float("nan"),
            effective_k=self._last_k, component=component, best_y=best,
        ))
        self._wall.append(time.perf_counter() - self._pending_t0)

    def tell(self, raw, y: float) -> None:
        if self._pending is None:
            raise ConfigError("tell() without a pending ask()")
        y = float(y)
        self._append(raw, y if np.isfinite(y) else float("nan"))

    def tell_failure(self, raw) -> None:
        if self._pending is None:
            raise ConfigError("tell_failure() without a pending ask()")
        self._append(raw, float("nan"))

    def result(self) -> RunResult:
        best_x = None
        best_y = float("nan")
        direction = self.config.acquisition.direction
        for rec in self._records:
            if rec.failed:
                continue
            if best_x is None or (rec.y > best_y if direction == "maximize" else rec.y < best_y):
                best_x, best_y = rec.raw, rec.y
        return RunResult(records=tuple(self._records), best_x=best_x, best_y=best_y,
                         direction=direction, wall_times=tuple(self._wall))


def optimize(objective, space: SearchSpace, config: EngineConfig, seed: int) -> RunResult:
    """Run the full loop against an objective until the budget is spent."""
    if objective.direction != config.acquisition.direction:
        config = replace(config, acquisition=replace(
            config.acquisition, direction=objective.direction))
    tuner = Tuner(space, config, seed)
    while tuner.steps_taken < config.max_samples:
        raw = tuner.ask()
        try:
            y = float(objective.evaluate(raw))
        except EvaluationError:
            tuner.tell_failure(raw)
            continue
        if np.isfinite(y):
            tuner.tell(raw, y)
        else:
            tuner.tell_failure(raw)
    return tuner.result()
