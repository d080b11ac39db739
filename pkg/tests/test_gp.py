import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clustergp.errors import ConfigError, NumericError
from clustergp import gp
from clustergp.gp import (
    FitConfig, KernelSpec, build_component, canonical_family, fit_component,
    kernel_eval, kernel_matrix, log_marginal_likelihood, predict, predict_many,
)

# ---------------------------------------------------------------------------
# dense-solve oracle: same math, independent linear-algebra route
# ---------------------------------------------------------------------------

def oracle_corr(family, dist, ell):
    r = dist / ell
    if family == "matern12":
        return math.exp(-r)
    if family == "matern32":
        return (1.0 + math.sqrt(3.0) * r) * math.exp(-math.sqrt(3.0) * r)
    if family == "matern52":
        return (1.0 + math.sqrt(5.0) * r + 5.0 * r * r / 3.0) * math.exp(-math.sqrt(5.0) * r)
    if family == "sqexp":
        return math.exp(-r * r / 2.0)
    raise ValueError(family)


def oracle_cov(family, ell, sig2, X, Z):
    K = np.empty((len(X), len(Z)))
    for i, a in enumerate(X):
        for j, b in enumerate(Z):
            K[i, j] = sig2 * oracle_corr(family, float(np.linalg.norm(a - b)), ell)
    return K


def oracle_lml(family, ell, sig2, noise, X, y):
    K = oracle_cov(family, ell, sig2, X, X) + noise * np.eye(len(X))
    Ki = np.linalg.inv(K)
    _, logdet = np.linalg.slogdet(K)
    return -0.5 * y @ Ki @ y - 0.5 * logdet - 0.5 * len(y) * math.log(2 * math.pi)


def oracle_predict(family, ell, sig2, noise, X, y, Q):
    K = oracle_cov(family, ell, sig2, X, X) + noise * np.eye(len(X))
    Ki = np.linalg.inv(K)
    ks = oracle_cov(family, ell, sig2, X, Q)
    mean = ks.T @ Ki @ y
    var = sig2 - np.sum(ks * (Ki @ ks), axis=0)
    return mean, var


def random_instance(rng, family):
    d = int(rng.integers(1, 4))
    n = int(rng.integers(3, 13))
    X = rng.random((n, d))
    y = rng.standard_normal(n)
    ell = float(rng.uniform(0.05, 2.0))
    sig2 = float(rng.uniform(0.2, 5.0))
    noise = float(rng.uniform(1e-6, 0.1))
    return d, X, y, ell, sig2, noise


# ---------------------------------------------------------------------------
# kernel values
# ---------------------------------------------------------------------------

def test_matern32_closed_form_at_unit_distance():
    spec = KernelSpec("matern32", length_scale=1.0, signal_variance=1.0)
    got = kernel_eval(spec, [0.0, 0.0], [1.0, 0.0])
    want = (1.0 + math.sqrt(3.0)) * math.exp(-math.sqrt(3.0))
    assert got == pytest.approx(want, abs=1e-12)


def test_kernel_at_zero_distance_equals_signal_variance():
    for family in gp.KERNEL_FAMILIES:
        spec = KernelSpec(family, length_scale=0.3, signal_variance=2.5)
        assert kernel_eval(spec, [0.2, 0.7], [0.2, 0.7]) == pytest.approx(2.5, abs=1e-12)


def test_kernel_aliases():
    assert canonical_family("matern-3/2") == "matern32"
    assert canonical_family("squared-exponential") == "sqexp"
    assert canonical_family("RBF") == "sqexp"
    with pytest.raises(ConfigError):
        canonical_family("cubic")


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(gp.KERNEL_FAMILIES), st.integers(0, 10_000))
def test_kernel_matrix_symmetric_and_near_psd(family, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((8, 2))
    spec = KernelSpec(family, float(rng.uniform(0.05, 3.0)), float(rng.uniform(0.1, 4.0)))
    K = kernel_matrix(spec, X)
    assert np.allclose(K, K.T, atol=1e-12)
    assert np.linalg.eigvalsh(K).min() > -1e-8


def test_kernel_matrix_matches_oracle():
    rng = np.random.default_rng(3)
    X = rng.random((6, 3))
    Z = rng.random((4, 3))
    for family in gp.KERNEL_FAMILIES:
        spec = KernelSpec(family, 0.37, 1.9)
        assert np.allclose(kernel_matrix(spec, X, Z), oracle_cov(family, 0.37, 1.9, X, Z), atol=1e-12)


# ---------------------------------------------------------------------------
# marginal likelihood and prediction against the dense oracle
# ---------------------------------------------------------------------------

def test_lml_matches_dense_oracle():
    rng = np.random.default_rng(11)
    for family in gp.KERNEL_FAMILIES:
        for _ in range(5):
            _, X, y, ell, sig2, noise = random_instance(rng, family)
            got = log_marginal_likelihood(KernelSpec(family, ell, sig2), noise, X, y)
            assert got == pytest.approx(oracle_lml(family, ell, sig2, noise, X, y), abs=1e-10)


def test_posterior_matches_dense_oracle():
    rng = np.random.default_rng(12)
    for family in gp.KERNEL_FAMILIES:
        _, X, y, ell, sig2, noise = random_instance(rng, family)
        comp = build_component(X, y, KernelSpec(family, ell, sig2), noise)
        Q = rng.random((7, X.shape[1]))
        mean, var = predict_many(comp, Q)
        # oracle works in standardized space, map back out
        y_std = (y - comp.y_mean) / comp.y_sd
        om, ov = oracle_predict(family, ell, sig2, noise, X, y_std, Q)
        assert np.allclose(mean, comp.y_mean + comp.y_sd * om, atol=1e-9)
        assert np.allclose(var, comp.y_sd ** 2 * np.maximum(ov, 0.0), atol=1e-9)


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(21)
    from scipy.spatial.distance import cdist
    for family in gp.KERNEL_FAMILIES:
        X = rng.random((9, 2))
        y = rng.standard_normal(9)
        D = cdist(X, X)
        z = np.log([0.3, 1.4, 1e-3])
        _, grad = gp._negative_lml_and_grad(z, family, D, y)
        eps = 1e-6
        for i in range(3):
            zp, zm = z.copy(), z.copy()
            zp[i] += eps
            zm[i] -= eps
            fp, _ = gp._negative_lml_and_grad(zp, family, D, y)
            fm, _ = gp._negative_lml_and_grad(zm, family, D, y)
            assert grad[i] == pytest.approx((fp - fm) / (2 * eps), rel=1e-4, abs=1e-6)


# ---------------------------------------------------------------------------
# fitting behaviour
# ---------------------------------------------------------------------------

def test_fit_interpolates_with_tiny_noise():
    rng = np.random.default_rng(5)
    X = rng.random((10, 1))
    y = np.sin(6 * X[:, 0])
    comp = build_component(X, y, KernelSpec("matern52", 0.4, 1.0), 1e-8)
    mean, _ = predict_many(comp, X)
    assert np.max(np.abs(mean - y)) < 1e-3


def test_far_field_reverts_to_prior():
    X = np.full((6, 2), 0.5) + np.random.default_rng(8).random((6, 2)) * 0.01
    y = np.array([3.0, 3.5, 2.5, 3.2, 2.8, 3.1])
    spec = KernelSpec("matern32", length_scale=0.05, signal_variance=1.3)
    comp = build_component(X, y, spec, 1e-6)
    m, v = predict(comp, [0.0, 0.0])
    assert m == pytest.approx(comp.y_mean, rel=0.01)
    assert v == pytest.approx(1.3 * comp.y_sd ** 2, rel=0.01)


def test_fit_achieves_at_least_default_start_likelihood():
    rng = np.random.default_rng(31)
    X = rng.random((15, 2))
    y = np.sin(4 * X[:, 0]) + 0.1 * rng.standard_normal(15)
    comp = fit_component(X, y, "matern32", rng=np.random.default_rng(0))
    y_std = (y - comp.y_mean) / comp.y_sd
    at_default = log_marginal_likelihood(KernelSpec("matern32", 0.2, 1.0), 1e-4, X, y_std)
    assert comp.log_marginal >= at_default - 1e-9
    box = FitConfig()
    assert box.length_scale_bounds[0] <= comp.kernel.length_scale <= box.length_scale_bounds[1]
    assert box.noise_variance_bounds[0] <= comp.noise_variance <= box.noise_variance_bounds[1]


def test_response_shift_and_scale_invariance():
    rng = np.random.default_rng(41)
    X = rng.random((12, 2))
    y = np.cos(5 * X[:, 1]) + 0.05 * rng.standard_normal(12)
    Q = rng.random((6, 2))
    base = fit_component(X, y, "matern32", rng=np.random.default_rng(7))
    m0, v0 = predict_many(base, Q)
    for a, b in [(3.0, -2.0), (0.2, 10.0), (-1.5, 1.0)]:
        other = fit_component(X, a * y + b, "matern32", rng=np.random.default_rng(7))
        m1, v1 = predict_many(other, Q)
        assert np.allclose(m1, a * m0 + b, rtol=1e-6, atol=1e-8)
        assert np.allclose(v1, a * a * v0, rtol=1e-6, atol=1e-10)


def test_posterior_variance_never_exceeds_prior():
    rng = np.random.default_rng(51)
    for seed in range(5):
        r = np.random.default_rng(seed)
        X = r.random((10, 2))
        y = r.standard_normal(10)
        comp = fit_component(X, y, "matern12", rng=r)
        Q = rng.random((50, 2))
        _, var = predict_many(comp, Q)
        prior = (comp.kernel.signal_variance + comp.noise_variance) * comp.y_sd ** 2
        assert np.all(var <= prior + 1e-9)


def test_degenerate_inputs_fall_back_to_defaults():
    X = np.tile([[0.3, 0.3]], (4, 1))
    y = np.array([1.0, 2.0, 3.0, 4.0])
    comp = fit_component(X, y, "matern32", rng=np.random.default_rng(0))
    assert comp.degenerate
    assert comp.kernel.length_scale == pytest.approx(0.2)
    assert comp.noise_variance >= 1e-4
    single = fit_component([[0.5]], [2.0], "matern32", rng=np.random.default_rng(0))
    assert single.degenerate
    m, v = predict(single, [0.9])
    assert np.isfinite(m) and v >= 0


def test_duplicated_points_engage_jitter():
    X = np.array([[0.2], [0.2], [0.8]])
    y = np.array([1.0, 1.0, 2.0])
    comp = build_component(X, y, KernelSpec("sqexp", 0.5, 1.0), 0.0)
    assert comp.jitter > 0
    mean, var = predict_many(comp, X)
    assert np.all(np.isfinite(mean)) and np.all(var >= 0)


def test_jitter_escalation_gives_up_on_indefinite_matrix():
    with pytest.raises(NumericError):
        gp._chol_with_jitter(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_constant_response_predicts_the_constant():
    rng = np.random.default_rng(61)
    X = rng.random((8, 2))
    comp = fit_component(X, np.full(8, 4.2), "matern32", rng=rng)
    m, v = predict(comp, [0.5, 0.5])
    assert m == pytest.approx(4.2, abs=1e-6)
    assert v >= 0


def test_fit_rejects_mismatched_shapes():
    with pytest.raises(ConfigError):
        fit_component([[0.1], [0.2]], [1.0], "matern32")
    with pytest.raises(ConfigError):
        KernelSpec("matern32", length_scale=-1.0)
