"""Expected improvement and the cluster-size-weighted proposal rule.

Each component maximizes expected improvement against its own incumbent (the
best response observed inside that component) over the candidates classified
to it; the winner across components is the one whose best EI divided by its
cluster size is largest, so small clusters keep receiving samples even when a
large cluster dominates raw EI.  Candidates come from a scrambled
low-discrepancy pool refreshed every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr
from scipy.spatial.distance import cdist
from scipy.stats import qmc

from .errors import ConfigError
from .gp import predict_many

DIRECTIONS = ("maximize", "minimize")

_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class AcquisitionConfig:
    """Proposal knobs: direction, candidate pool size, boundary bonus weight."""

    direction: str = "maximize"
    candidate_count: int = 2048
    boundary_weight: float = 0.0

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ConfigError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        if self.candidate_count < 1:
            raise ConfigError("candidate_count must be positive")
        if self.boundary_weight < 0:
            raise ConfigError("boundary_weight must be nonnegative")


def expected_improvement(mean, sd, incumbent: float, direction: str = "maximize") -> np.ndarray:
    """Closed-form expected improvement over the incumbent, elementwise.

    For maximization with improvement m - inc and predictive sd s:
    EI = (m - inc) * Phi(z) + s * phi(z) with z = (m - inc) / s; the s -> 0
    limit is max(m - inc, 0).  Minimization mirrors the improvement sign.
    """
    if direction not in DIRECTIONS:
        raise ConfigError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    mean, sd = np.broadcast_arrays(np.asarray(mean, dtype=float), np.asarray(sd, dtype=float))
    if np.any(sd < 0):
        raise ConfigError("sd must be nonnegative")
    imp = mean - incumbent if direction == "maximize" else incumbent - mean
    out = np.maximum(imp, 0.0)
    positive = sd > 0
    if np.any(positive):
        z = np.divide(imp, sd, out=np.zeros_like(imp), where=positive)
        phi = np.exp(-0.5 * z * z) / _SQRT_2PI
        ei = imp * ndtr(z) + sd * phi
        out = np.where(positive, np.maximum(ei, 0.0), out)
    return out


def boundary_bonus(pool: np.ndarray, labels: np.ndarray, component: int, weight: float) -> np.ndarray:
    """Bonus pushing proposals toward the component's decision boundary.

    The nearest differently-labeled pool point stands in for the boundary:
    bonus = weight * (1 - (d_b / d_max)^2), largest right on the boundary
    proxy, zero at the component's deepest interior candidate.
    """
    mask = labels == component
    members = pool[mask]
    others = pool[~mask]
    if len(members) == 0:
        return np.empty(0)
    if len(others) == 0 or weight == 0.0:
        return np.zeros(len(members))
    d_b = cdist(members, others).min(axis=1)
    d_max = d_b.max()
    if d_max <= 0:
        return np.zeros(len(members))
    return weight * (1.0 - (d_b / d_max) ** 2)


@dataclass(frozen=True)
class Proposal:
    """A chosen unit point plus the scored pool it came from (for deduplication)."""

    point: np.ndarray
    component: int
    ei_value: float
    pool: np.ndarray
    pool_labels: np.ndarray
    pool_scores: np.ndarray  # size-weighted acquisition per candidate; -inf when unscored


def candidate_pool(d: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Scrambled low-discrepancy candidates in the unit cube."""
    m = max(0, math.ceil(math.log2(count)))
    sobol = qmc.Sobol(d, scramble=True, seed=rng)
    return sobol.random_base2(m)[:count]


def propose_next(model, config: AcquisitionConfig, rng: np.random.Generator) -> Proposal | None:
    """Pick the next unit point by size-weighted expected improvement.

    Within each component the winner is the best acquisition value (EI, plus
    the boundary bonus on EI normalized to [0, 1] when the bonus is active);
    across components the winner is argmax of EI(x0[j]) / n_j.  Components
    with no classified candidates are skipped; returns None if every component
    is skipped.
    """
    pool = candidate_pool(model.dim, config.candidate_count, rng)
    labels = model.classify_units(pool)
    scores = np.full(len(pool), -np.inf)
    best_j, best_weighted, best_point, best_ei = None, -np.inf, None, 0.0
    use_bonus = config.boundary_weight > 0 and len(model.components) > 1
    for j in sorted(model.components):
        mask = labels == j
        if not np.any(mask):
            continue
        comp = model.components[j]
        means, variances = predict_many(comp, pool[mask])
        incumbent = float(comp.y_raw.max() if config.direction == "maximize" else comp.y_raw.min())
        ei = expected_improvement(means, np.sqrt(variances), incumbent, config.direction)
        if use_bonus:
            top = ei.max()
            normalized = ei / top if top > 0 else np.zeros_like(ei)
            acq = normalized + boundary_bonus(pool, labels, j, config.boundary_weight)
        else:
            acq = ei
        scores[mask] = acq / comp.n
        local = int(np.argmax(acq))
        weighted = ei[local] / comp.n
        if weighted > best_weighted:
            best_j, best_weighted = j, weighted
            best_point, best_ei = pool[mask][local], float(ei[local])
    if best_j is None:
        return None
    return Proposal(
        point=best_point, component=best_j, ei_value=best_ei,
        pool=pool, pool_labels=labels, pool_scores=scores,
    )
