import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import bivariate, chain
from d2c.dag import simulate
from d2c.infoth import (
    DegenerateInputError,
    EstimatorConfig,
    IllPosedRegressionError,
    cond_mi,
    gaussian_mi,
    loo_cond_variance,
    mi_with_target,
)

KNN = EstimatorConfig(regressor="knn")


def exact_rho_pair(rho, n=500, seed=0):
    """Series whose sample correlation is exactly ``rho`` (up to rounding)."""
    rng = np.random.default_rng(seed)
    x = rng.normal(size=n)
    z = rng.normal(size=n)
    x = x - x.mean()
    z = z - z.mean()
    z = z - (z @ x) / (x @ x) * x
    x /= np.linalg.norm(x)
    z /= np.linalg.norm(z)
    return x, rho * x + math.sqrt(1 - rho**2) * z


def brute_loo_mse(y, P):
    """Refit ordinary least squares N times, each time without one row."""
    n = len(y)
    A = np.column_stack([np.ones(n), P]) if P is not None else np.ones((n, 1))
    err = np.empty(n)
    for k in range(n):
        m = np.arange(n) != k
        beta, *_ = np.linalg.lstsq(A[m], y[m], rcond=None)
        err[k] = y[k] - A[k] @ beta
    return np.mean(err**2)


def brute_loo_knn(y, P, k):
    n = len(y)
    Ps = (P - P.mean(0)) / P.std(0)
    err = np.empty(n)
    for r in range(n):
        d = np.sqrt(((Ps - Ps[r]) ** 2).sum(1))
        d[r] = np.inf
        nb = np.argsort(d, kind="stable")[:k]
        w = 1 / (d[nb] + 1e-8)
        err[r] = y[r] - (w @ y[nb]) / w.sum()
    return np.mean(err**2)


def test_zero_correlation_gives_zero():
    x, y = exact_rho_pair(0.0)
    assert gaussian_mi(x, y) == pytest.approx(0.0, abs=1e-12)


def test_rho_point_eight():
    x, y = exact_rho_pair(0.8)
    # -0.5 * ln(1 - 0.64) = 0.510825...
    assert gaussian_mi(x, y) == pytest.approx(0.5108, abs=1e-4)


def test_identical_series_hits_the_guard():
    x = np.random.default_rng(1).normal(size=100)
    v = gaussian_mi(x, x)
    assert math.isfinite(v)
    assert v == pytest.approx(-0.5 * math.log(1 - 0.9999**2))


def test_zero_variance_is_degenerate():
    with pytest.raises(DegenerateInputError):
        gaussian_mi(np.ones(10), np.arange(10.0))


def test_gaussian_mi_rejects_bad_shapes():
    with pytest.raises(ValueError):
        gaussian_mi(np.arange(2.0), np.arange(2.0))
    with pytest.raises(ValueError):
        gaussian_mi(np.arange(5.0), np.arange(4.0))


@pytest.mark.parametrize("rho", [0.2, 0.5, 0.8])
def test_gaussian_mi_converges(rho):
    # one N=10000 draw at rho=0.2 has ~10% relative sd, so average 50 draws
    truth = -0.5 * math.log(1 - rho**2)
    est = np.mean([gaussian_mi(*bivariate(rho, 10_000, seed=s)) for s in range(50)])
    assert abs(est - truth) / truth < 0.05


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


@settings(max_examples=200, deadline=None)
@given(arrays(float, st.integers(3, 50).map(lambda n: (2, n)), elements=finite))
def test_gaussian_mi_symmetric_and_nonnegative(xy):
    x, y = xy
    assume(np.std(x) > 1e-6 and np.std(y) > 1e-6)
    a, b = gaussian_mi(x, y), gaussian_mi(y, x)
    assert a == b
    assert a >= 0


@settings(max_examples=100, deadline=None)
@given(
    seed=st.integers(0, 10**6),
    scale=st.floats(0.01, 100).flatmap(lambda s: st.sampled_from([s, -s])),
    shift=st.floats(-100, 100),
)
def test_gaussian_mi_affine_invariant(seed, scale, shift):
    x, y = bivariate(0.6, 200, seed)
    assert abs(gaussian_mi(scale * x + shift, y) - gaussian_mi(x, y)) < 1e-10
    assert abs(gaussian_mi(x, scale * y + shift) - gaussian_mi(x, y)) < 1e-10


def test_cond_mi_without_conditioning_matches_gaussian_mi():
    x, y = bivariate(0.6, 2000, seed=3)
    assert abs(cond_mi(x, y) - gaussian_mi(x, y)) < 0.02


def test_chain_is_d_separated(chain_data):
    _, ds = chain_data
    X = ds.observations
    assert cond_mi(X[:, 0], X[:, 2], [X[:, 1]]) < 0.02
    assert cond_mi(X[:, 0], X[:, 2]) > 0.1


def test_independent_gives_zero():
    rng = np.random.default_rng(4)
    x, y, z = rng.normal(size=(3, 500))
    assert cond_mi(x, y, [z]) == pytest.approx(0.0, abs=0.01)
    assert cond_mi(x, y, [z]) >= 0


def test_large_conditioning_set_is_ill_posed():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 13))
    with pytest.raises(IllPosedRegressionError):
        cond_mi(X[:, 0], X[:, 1], X[:, 2:13])


def test_loo_constant_target_floors():
    rng = np.random.default_rng(0)
    assert loo_cond_variance(np.full(50, 3.0), rng.normal(size=(50, 2))) == 1e-12


def test_loo_linear_residual_variance():
    rng = np.random.default_rng(5)
    p = rng.normal(size=5000)
    t = 2 * p + rng.normal(0, 0.5, 5000)
    assert loo_cond_variance(t, [p]) == pytest.approx(0.25, abs=0.02)


def test_loo_empty_predictors_matches_loo_mean():
    y = np.random.default_rng(6).normal(size=37)
    n = len(y)
    oracle = np.mean([(y[k] - np.delete(y, k).mean()) ** 2 for k in range(n)])
    assert loo_cond_variance(y, None) == pytest.approx(oracle, rel=1e-12)
    assert loo_cond_variance(y, []) == pytest.approx(oracle, rel=1e-12)


@pytest.mark.parametrize("p", [1, 3])
def test_loo_linear_matches_refitting(p):
    rng = np.random.default_rng(p)
    P = rng.normal(size=(40, p))
    y = P @ rng.normal(size=p) + rng.normal(size=40)
    assert loo_cond_variance(y, P) == pytest.approx(brute_loo_mse(y, P), rel=1e-9)


def test_loo_knn_matches_brute_force():
    rng = np.random.default_rng(8)
    P = rng.normal(size=(60, 2))
    y = np.sin(P[:, 0]) + 0.1 * rng.normal(size=60)
    cfg = EstimatorConfig(regressor="knn", knn_k=5)
    assert loo_cond_variance(y, P, cfg) == pytest.approx(brute_loo_knn(y, P, 5), rel=1e-9)


def test_collinear_predictors_fall_back_to_ridge():
    rng = np.random.default_rng(9)
    p = rng.normal(size=100)
    y = p + 0.3 * rng.normal(size=100)
    v = loo_cond_variance(y, np.column_stack([p, 2 * p]))
    assert math.isfinite(v) and v == pytest.approx(loo_cond_variance(y, [p]), rel=0.05)


def test_knn_captures_nonlinear_dependence():
    rng = np.random.default_rng(10)
    x = rng.uniform(-2, 2, 1000)
    y = x**2 + 0.2 * rng.normal(size=1000)
    assert cond_mi(y, x) < 0.05
    assert cond_mi(y, x, cfg=KNN) > 0.5


def test_too_few_samples():
    with pytest.raises(IllPosedRegressionError):
        loo_cond_variance(np.arange(4.0), np.ones((4, 2)))


def test_mi_with_target_matches_pairwise():
    _, ds = simulate_small()
    X = ds.observations
    vec = mi_with_target(X[:, 1:], X[:, 0])
    each = [cond_mi(X[:, k], X[:, 0]) for k in range(1, X.shape[1])]
    assert np.allclose(vec, each, rtol=1e-10, atol=1e-12)


def simulate_small():
    dag = chain(5)
    return dag, simulate(dag, 300, seed=2)


def test_data_processing_over_seeds():
    dag = chain(3)
    ok = 0
    for seed in range(100):
        X = simulate(dag, 2000, seed).observations
        ok += cond_mi(X[:, 0], X[:, 2]) <= cond_mi(X[:, 0], X[:, 1]) + 0.05
    assert ok >= 90


def test_config_validation():
    for bad in (dict(regressor="kernel"), dict(knn_k=2), dict(rho_guard=1.0), dict(mi_floor=0.1)):
        with pytest.raises(ValueError):
            EstimatorConfig(**bad)
    assert EstimatorConfig(regressor="knn-local").regressor == "knn"


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), k=st.integers(0, 3))
def test_cond_mi_nonnegative(seed, k):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 2 + k))
    for cfg in (EstimatorConfig(), KNN):
        assert cond_mi(X[:, 0], X[:, 1], X[:, 2:], cfg) >= 0
