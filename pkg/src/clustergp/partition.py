"""Induce a domain partition from joint input-response structure.

Observations are embedded as (x, xi * standardized y) so that clustering sees
jumps and regime changes in the response as geometric separation.  Clusters
come either from k-means or from a truncated Dirichlet-process Gaussian
mixture; clusters that are too small to support a surrogate are dissolved into
their nearest surviving neighbour.  A k-nearest-neighbour vote on the inputs
alone then extends the labeling to every point of the unit cube, which is what
lets each component's surrogate claim a region of the domain.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist
from sklearn.exceptions import ConvergenceWarning
from sklearn.mixture import BayesianGaussianMixture

from .errors import ConfigError

CLUSTER_METHODS = ("kmeans", "dgm")

_KMEANS_RESTARTS = 5
_KMEANS_MAX_ITER = 100
_DGM_MAX_ITER = 200
_DGM_TOL = 1e-4


@dataclass(frozen=True)
class ClusteringSpec:
    """How to cluster: method, cluster count (k or the truncation k_max), response weight."""

    method: str = "kmeans"
    k: int = 3
    xi: float = 1.0
    min_cluster_size: int | None = None  # None: engine supplies max(2, d + 1)

    def __post_init__(self):
        if self.method not in CLUSTER_METHODS:
            raise ConfigError(f"unknown clustering method {self.method!r}; expected one of {CLUSTER_METHODS}")
        if self.k < 1:
            raise ConfigError("cluster count must be at least 1")
        if self.xi < 0:
            raise ConfigError("xi must be nonnegative")
        if self.min_cluster_size is not None and self.min_cluster_size < 1:
            raise ConfigError("min_cluster_size must be at least 1")


def build_feature_pairs(X_unit, y, xi: float) -> np.ndarray:
    """Stack unit inputs with globally standardized responses scaled by xi."""
    X_unit = np.atleast_2d(np.asarray(X_unit, dtype=float))
    y = np.asarray(y, dtype=float)
    if len(X_unit) != len(y):
        raise ConfigError("X and y must be the same length")
    sd = float(np.std(y))
    if not sd > 1e-12:
        sd = 1.0
    y_feat = xi * (y - np.mean(y)) / sd
    return np.hstack([X_unit, y_feat[:, None]])


def _kmeans_pp_centers(features: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: spread initial centers by squared-distance sampling."""
    n = len(features)
    idx = [int(rng.integers(n))]
    d2 = np.sum((features - features[idx[0]]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx.append(int(rng.integers(n)))
            continue
        pick = int(rng.choice(n, p=d2 / total))
        idx.append(pick)
        d2 = np.minimum(d2, np.sum((features - features[pick]) ** 2, axis=1))
    return features[idx].copy()


def _lloyd(features: np.ndarray, centers: np.ndarray, max_iter: int):
    """Lloyd iterations to an assignment fixpoint; returns labels, centers, WCSS history.

    Centers that lose all members are dropped, which keeps the within-cluster
    sum of squares non-increasing across iterations.
    """
    prev = None
    history = []
    for _ in range(max_iter):
        labels = np.argmin(cdist(features, centers), axis=1)
        used = np.unique(labels)
        if used.size < len(centers):
            labels = _compact_labels(labels)
        centers = np.stack([features[labels == j].mean(axis=0) for j in range(used.size)])
        history.append(float(np.sum((features - centers[labels]) ** 2)))
        if prev is not None and np.array_equal(labels, prev):
            break
        prev = labels
    return prev, centers, history


def cluster_kmeans(features, k: int, rng: np.random.Generator) -> np.ndarray:
    """Best-of-restarts Lloyd k-means on feature pairs; labels are 0..k_eff-1."""
    features = np.atleast_2d(np.asarray(features, dtype=float))
    n = len(features)
    if n < 2:
        raise ConfigError("clustering needs at least two observations")
    k_eff = min(k, n)
    best_labels, best_wcss = None, np.inf
    for _ in range(_KMEANS_RESTARTS):
        centers = _kmeans_pp_centers(features, k_eff, rng)
        labels, _, history = _lloyd(features, centers, _KMEANS_MAX_ITER)
        if history[-1] < best_wcss:
            best_labels, best_wcss = labels, history[-1]
    return _compact_labels(best_labels)


def cluster_dgm(features, k_max: int, rng: np.random.Generator) -> np.ndarray:
    """Truncated Dirichlet-process Gaussian mixture; empty components are dropped.

    Fits a variational Bayesian mixture with full covariances truncated at
    k_max components and weight concentration 1 / k_max, then discards any
    component whose responsibility-weighted count falls below one observation.
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    n = len(features)
    if n < 2:
        raise ConfigError("clustering needs at least two observations")
    seed = int(rng.integers(2 ** 31 - 1))
    n_components = min(k_max, n)
    reg = 1e-6
    resp = None
    while reg <= 1e-2:
        mixture = BayesianGaussianMixture(
            n_components=n_components,
            covariance_type="full",
            weight_concentration_prior_type="dirichlet_process",
            weight_concentration_prior=1.0 / k_max,
            max_iter=_DGM_MAX_ITER,
            tol=_DGM_TOL,
            reg_covar=reg,
            n_init=1,
            random_state=seed,
        )
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", ConvergenceWarning)
                mixture.fit(features)
            resp = mixture.predict_proba(features)
            break
        except (ValueError, np.linalg.LinAlgError):
            reg *= 100.0
    if resp is None:
        raise ConfigError("mixture fit failed even with heavy covariance regularization")
    counts = resp.sum(axis=0)
    keep = np.flatnonzero(counts >= 1.0)
    if keep.size == 0:
        keep = np.array([int(np.argmax(counts))])
    labels = keep[np.argmax(resp[:, keep], axis=1)]
    return _compact_labels(labels)


def _compact_labels(labels: np.ndarray) -> np.ndarray:
    """Relabel to contiguous 0..K-1 preserving ascending original label order."""
    uniq = np.unique(labels)
    lookup = {int(v): i for i, v in enumerate(uniq)}
    return np.array([lookup[int(v)] for v in labels])


def prune_small_clusters(labels, features, min_cluster_size: int) -> np.ndarray:
    """Dissolve clusters below the size floor into the nearest surviving centroid.

    If every cluster is too small the largest one absorbs everything, so the
    result always has at least one cluster and every surviving cluster keeps at
    least min_cluster_size members.
    """
    labels = np.asarray(labels)
    features = np.atleast_2d(np.asarray(features, dtype=float))
    uniq, counts = np.unique(labels, return_counts=True)
    survivors = uniq[counts >= min_cluster_size]
    if survivors.size == 0:
        survivors = uniq[counts == counts.max()][:1]
    if survivors.size == uniq.size:
        return _compact_labels(labels)
    centroids = np.stack([features[labels == j].mean(axis=0) for j in survivors])
    out = labels.copy()
    dissolved = ~np.isin(labels, survivors)
    nearest = np.argmin(cdist(features[dissolved], centroids), axis=1)
    out[dissolved] = survivors[nearest]
    return _compact_labels(out)


@dataclass(frozen=True)
class ClassifierModel:
    """k-NN labeling rule over unit inputs; ties go to the nearest neighbour."""

    train_X: np.ndarray
    train_labels: np.ndarray
    k_neighbors: int = 3

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ConfigError("k_neighbors must be at least 1")
        if len(self.train_X) == 0 or len(self.train_X) != len(self.train_labels):
            raise ConfigError("classifier needs matching non-empty training inputs and labels")


def classify_many(model: ClassifierModel, X) -> np.ndarray:
    """Label each row of X by majority vote among the k nearest training inputs.

    Vote ties resolve to the single nearest neighbour's label among the tied
    labels; exact distance ties resolve to the lower observation index.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] == 0:
        return np.empty(0, dtype=int)
    n = len(model.train_X)
    k = min(model.k_neighbors, n)
    dists = cdist(model.train_X, X)
    order = np.argsort(dists, axis=0, kind="stable")[:k]  # stable: lower index wins ties
    votes = model.train_labels[order]                      # (k, m)
    m = X.shape[0]
    n_labels = int(model.train_labels.max()) + 1
    counts = np.zeros((m, n_labels), dtype=int)
    cols = np.arange(m)
    for i in range(k):
        counts[cols, votes[i]] += 1
    max_counts = counts.max(axis=1)
    out = np.full(m, -1)
    for i in range(k):
        undecided = out == -1
        wins = counts[cols, votes[i]] == max_counts
        take = undecided & wins
        out[take] = votes[i][take]
    return out


def classify(model: ClassifierModel, x) -> int:
    """Label a single unit point."""
    return int(classify_many(model, np.atleast_2d(np.asarray(x, dtype=float)))[0])
