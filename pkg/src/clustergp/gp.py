"""Gaussian-process regression on the unit cube with isotropic kernels.

Hyperparameters (length scale, signal variance, noise variance) are chosen by
maximizing the log marginal likelihood with a small multi-start bounded search
in log space: one start from fixed defaults plus a seeded quasi-random scatter
over the search box.  Responses are standardized inside each fit and
predictions are mapped back to raw response units, so components trained on
very different response ranges behave identically in standardized space.

All inputs are expected in unit-cube coordinates; distances are Euclidean and
the length scale is shared across dimensions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist
from scipy.stats import qmc

from .errors import ConfigError, NumericError

KERNEL_FAMILIES = ("matern12", "matern32", "matern52", "sqexp")

_FAMILY_ALIASES = {
    "matern-1/2": "matern12",
    "matern-3/2": "matern32",
    "matern-5/2": "matern52",
    "squared-exponential": "sqexp",
    "rbf": "sqexp",
}

_SQRT3 = math.sqrt(3.0)
_SQRT5 = math.sqrt(5.0)
_LOG_2PI = math.log(2.0 * math.pi)

_JITTER_START = 1e-10
_JITTER_LIMIT = 1e-4


def canonical_family(name: str) -> str:
    """Resolve a kernel family name or alias to its canonical form."""
    key = name.strip().lower()
    key = _FAMILY_ALIASES.get(key, key)
    if key not in KERNEL_FAMILIES:
        raise ConfigError(f"unknown kernel family {name!r}; expected one of {KERNEL_FAMILIES}")
    return key


@dataclass(frozen=True)
class KernelSpec:
    """Stationary kernel: family plus length scale and signal variance."""

    family: str = "matern32"
    length_scale: float = 0.2
    signal_variance: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", canonical_family(self.family))
        if not self.length_scale > 0:
            raise ConfigError("length_scale must be positive")
        if not self.signal_variance > 0:
            raise ConfigError("signal_variance must be positive")


def _correlation(family: str, r: np.ndarray) -> np.ndarray:
    """Unit-variance correlation as a function of scaled distance r = d / ell."""
    if family == "matern12":
        return np.exp(-r)
    if family == "matern32":
        t = _SQRT3 * r
        return (1.0 + t) * np.exp(-t)
    if family == "matern52":
        t = _SQRT5 * r
        return (1.0 + t + t * t / 3.0) * np.exp(-t)
    if family == "sqexp":
        return np.exp(-0.5 * r * r)
    raise ConfigError(f"unknown kernel family {family!r}")


def _correlation_dlog_ell(family: str, r: np.ndarray) -> np.ndarray:
    """Derivative of the correlation with respect to log(length scale)."""
    if family == "matern12":
        return r * np.exp(-r)
    if family == "matern32":
        return 3.0 * r * r * np.exp(-_SQRT3 * r)
    if family == "matern52":
        return (5.0 / 3.0) * r * r * (1.0 + _SQRT5 * r) * np.exp(-_SQRT5 * r)
    if family == "sqexp":
        return r * r * np.exp(-0.5 * r * r)
    raise ConfigError(f"unknown kernel family {family!r}")


def kernel_eval(spec: KernelSpec, x1, x2) -> float:
    """Covariance between two points."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    r = np.linalg.norm(x1 - x2) / spec.length_scale
    return float(spec.signal_variance * _correlation(spec.family, np.asarray(r)))


def kernel_matrix(spec: KernelSpec, X, Z=None) -> np.ndarray:
    """Covariance matrix between rows of X and rows of Z (Z defaults to X)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = X if Z is None else np.atleast_2d(np.asarray(Z, dtype=float))
    r = cdist(X, Z) / spec.length_scale
    return spec.signal_variance * _correlation(spec.family, r)


def _chol_with_jitter(K: np.ndarray) -> tuple[tuple[np.ndarray, bool], float]:
    """Cholesky-factor K, escalating diagonal jitter tenfold on failure."""
    try:
        return cho_factor(K, lower=True, check_finite=False), 0.0
    except LinAlgError:
        pass
    jitter = _JITTER_START
    eye = np.eye(K.shape[0])
    while jitter <= _JITTER_LIMIT:
        try:
            return cho_factor(K + jitter * eye, lower=True, check_finite=False), jitter
        except LinAlgError:
            jitter *= 10.0
    raise NumericError(f"covariance matrix not positive definite even with jitter {_JITTER_LIMIT}")


def log_marginal_likelihood(spec: KernelSpec, noise_variance: float, X, y) -> float:
    """Gaussian log marginal likelihood of standardized responses y under the kernel."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    n = len(y)
    K = kernel_matrix(spec, X)
    K[np.diag_indices_from(K)] += noise_variance
    chol, _ = _chol_with_jitter(K)
    alpha = cho_solve(chol, y, check_finite=False)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    return float(-0.5 * y @ alpha - 0.5 * logdet - 0.5 * n * _LOG_2PI)


@dataclass(frozen=True)
class FitConfig:
    """Bounds and effort knobs for the marginal-likelihood search (log-space box)."""

    length_scale_bounds: tuple[float, float] = (0.01, 10.0)
    signal_variance_bounds: tuple[float, float] = (1e-3, 1e3)
    noise_variance_bounds: tuple[float, float] = (1e-8, 1.0)
    starts: int = 5
    maxiter: int = 60
    default_start: tuple[float, float, float] = (0.2, 1.0, 1e-4)

    def __post_init__(self):
        for lo, hi in (self.length_scale_bounds, self.signal_variance_bounds, self.noise_variance_bounds):
            if not (0 < lo < hi):
                raise ConfigError("hyperparameter bounds must satisfy 0 < lower < upper")
        if self.starts < 1:
            raise ConfigError("need at least one start")


@dataclass(frozen=True)
class FittedComponent:
    """One trained GP: kernel, noise, training data, and cached solves."""

    kernel: KernelSpec
    noise_variance: float
    X: np.ndarray
    y_raw: np.ndarray
    y_mean: float
    y_sd: float
    alpha: np.ndarray          # (K + noise I)^-1 y_std
    chol: tuple[np.ndarray, bool]
    log_marginal: float
    jitter: float = 0.0
    degenerate: bool = False

    @property
    def n(self) -> int:
        return len(self.y_raw)


def _standardize(y: np.ndarray) -> tuple[np.ndarray, float, float]:
    mean = float(np.mean(y))
    sd = float(np.std(y))
    if not sd > 1e-12:
        sd = 1.0
    return (y - mean) / sd, mean, sd


def build_component(X, y, kernel: KernelSpec, noise_variance: float) -> FittedComponent:
    """Assemble a component at fixed hyperparameters (no likelihood search)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) != len(y) or len(y) == 0:
        raise ConfigError("X and y must be non-empty and the same length")
    y_std, y_mean, y_sd = _standardize(y)
    K = kernel_matrix(kernel, X)
    K[np.diag_indices_from(K)] += noise_variance
    chol, jitter = _chol_with_jitter(K)
    alpha = cho_solve(chol, y_std, check_finite=False)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    lml = float(-0.5 * y_std @ alpha - 0.5 * logdet - 0.5 * len(y) * _LOG_2PI)
    return FittedComponent(
        kernel=kernel, noise_variance=noise_variance, X=X, y_raw=y,
        y_mean=y_mean, y_sd=y_sd, alpha=alpha, chol=chol,
        log_marginal=lml, jitter=jitter,
    )


def _negative_lml_and_grad(z: np.ndarray, family: str, D: np.ndarray, y: np.ndarray):
    """Negative LML and gradient in z = (log ell, log sig2, log noise)."""
    ell, sig2, noise = np.exp(z)
    n = len(y)
    r = D / ell
    C = _correlation(family, r)
    K = sig2 * C
    K[np.diag_indices_from(K)] += noise
    try:
        chol, _ = _chol_with_jitter(K)
    except NumericError:
        return np.inf, np.zeros(3)
    alpha = cho_solve(chol, y, check_finite=False)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    lml = -0.5 * y @ alpha - 0.5 * logdet - 0.5 * n * _LOG_2PI
    # d lml / d theta = 0.5 tr((alpha alpha^T - K^-1) dK/dtheta)
    Kinv = cho_solve(chol, np.eye(n), check_finite=False)
    A = np.outer(alpha, alpha) - Kinv
    g_ell = 0.5 * sig2 * np.sum(A * _correlation_dlog_ell(family, r))
    g_sig = 0.5 * sig2 * np.sum(A * C)
    g_noise = 0.5 * noise * np.trace(A)
    return -lml, -np.array([g_ell, g_sig, g_noise])


def _is_degenerate(X: np.ndarray) -> bool:
    return len(X) < 2 or bool(np.all(np.all(X == X[0], axis=1)))


def fit_component(X, y, family: str = "matern32", config: FitConfig = FitConfig(),
                  rng: np.random.Generator | None = None) -> FittedComponent:
    """Fit one GP component by multi-start maximum marginal likelihood.

    Degenerate inputs (fewer than two points, or all points identical) skip the
    search and fall back to the default hyperparameters with a noise floor; the
    result is flagged so callers can tell.  The achieved likelihood is never
    below the likelihood at any start point.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X) != len(y) or len(y) == 0:
        raise ConfigError("X and y must be non-empty and the same length")
    family = canonical_family(family)
    if rng is None:
        rng = np.random.default_rng(0)

    ell0, sig0, noise0 = config.default_start
    if _is_degenerate(X):
        comp = build_component(X, y, KernelSpec(family, ell0, sig0), max(noise0, 1e-4))
        return replace(comp, degenerate=True)

    y_std, y_mean, y_sd = _standardize(y)
    D = cdist(X, X)

    lo = np.log([config.length_scale_bounds[0], config.signal_variance_bounds[0],
                 config.noise_variance_bounds[0]])
    hi = np.log([config.length_scale_bounds[1], config.signal_variance_bounds[1],
                 config.noise_variance_bounds[1]])
    starts = [np.clip(np.log([ell0, sig0, noise0]), lo, hi)]
    if config.starts > 1:
        sobol = qmc.Sobol(3, scramble=True, seed=rng)
        extra = sobol.random(config.starts - 1)
        starts.extend(lo + extra * (hi - lo))

    best_z, best_nll = None, np.inf
    for z0 in starts:
        nll0, _ = _negative_lml_and_grad(z0, family, D, y_std)
        if nll0 < best_nll:
            best_z, best_nll = z0, nll0
        try:
            res = minimize(
                _negative_lml_and_grad, z0, args=(family, D, y_std),
                method="L-BFGS-B", jac=True, bounds=list(zip(lo, hi)),
                options={"maxiter": config.maxiter},
            )
        except (LinAlgError, ValueError):
            continue
        if np.isfinite(res.fun) and res.fun < best_nll:
            best_z, best_nll = np.clip(res.x, lo, hi), res.fun

    ell, sig2, noise = np.exp(best_z)
    ell = float(np.clip(ell, *config.length_scale_bounds))
    sig2 = float(np.clip(sig2, *config.signal_variance_bounds))
    noise = float(np.clip(noise, *config.noise_variance_bounds))
    spec = KernelSpec(family, float(ell), float(sig2))
    K = sig2 * _correlation(family, D / ell)
    K[np.diag_indices_from(K)] += noise
    chol, jitter = _chol_with_jitter(K)
    alpha = cho_solve(chol, y_std, check_finite=False)
    logdet = 2.0 * np.sum(np.log(np.diag(chol[0])))
    lml = float(-0.5 * y_std @ alpha - 0.5 * logdet - 0.5 * len(y) * _LOG_2PI)
    return FittedComponent(
        kernel=spec, noise_variance=float(noise), X=X, y_raw=y,
        y_mean=y_mean, y_sd=y_sd, alpha=alpha, chol=chol,
        log_marginal=lml, jitter=jitter,
    )


def predict_many(component: FittedComponent, X) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and latent variance, in raw response units, at each row of X."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        return np.empty(0), np.empty(0)
    kstar = kernel_matrix(component.kernel, component.X, X)
    mean_std = kstar.T @ component.alpha
    v = solve_triangular(component.chol[0], kstar, lower=component.chol[1],
                         check_finite=False)
    var_std = component.kernel.signal_variance - np.sum(v * v, axis=0)
    var_std = np.maximum(var_std, 0.0)
    mean = component.y_mean + component.y_sd * mean_std
    var = component.y_sd ** 2 * var_std
    return mean, var


def predict(component: FittedComponent, x) -> tuple[float, float]:
    """Posterior mean and variance at a single point."""
    mean, var = predict_many(component, np.atleast_2d(np.asarray(x, dtype=float)))
    return float(mean[0]), float(var[0])
