import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import ndtr

from sfsignal.errors import DimensionMismatch, ToleranceUnreachable
from sfsignal.mvn import CdfControl, cdf, cdf_batch

from conftest import random_pd, random_psd


def test_dim1_symmetry_and_exactness():
    assert cdf([0.0], [0.0], [[1.0]]) == 0.5
    for u in (-3.0, -0.7, 0.0, 1.3, 5.0):
        assert cdf([u], [0.4], [[2.5]]) == pytest.approx(ndtr((u - 0.4) / np.sqrt(2.5)), abs=1e-15)


def test_dim1_complement():
    for u in np.linspace(-3, 3, 13):
        mu = 0.25
        assert cdf([u], [mu], [[0.7]]) + cdf([2 * mu - u], [mu], [[0.7]]) == pytest.approx(1.0, abs=1e-12)


def test_independent_quadrant():
    assert cdf([0.0, 0.0], [0.0, 0.0], np.eye(2)) == pytest.approx(0.25, abs=1e-6)


def test_product_identity_for_independent_coordinates(rng):
    d = 5
    var = rng.uniform(0.5, 2.0, d)
    u, mu = rng.normal(size=d), rng.normal(size=d)
    expect = np.prod(ndtr((u - mu) / np.sqrt(var)))
    assert cdf(u, mu, np.diag(var)) == pytest.approx(expect, rel=1e-4)


def test_correlated_orthant():
    rho = 0.5
    cov = [[1.0, rho], [rho, 1.0]]
    exact = 0.25 + np.arcsin(rho) / (2 * np.pi)
    assert cdf([0.0, 0.0], [0.0, 0.0], cov) == pytest.approx(exact, abs=1e-4)


def test_correlated_orthant_monte_carlo():
    rng = np.random.default_rng(7)
    cov = np.array([[1.0, 0.5], [0.5, 1.0]])
    n = 10**7
    hits = 0
    for _ in range(10):
        x = rng.multivariate_normal([0, 0], cov, size=n // 10)
        hits += np.count_nonzero(np.all(x <= 0, axis=1))
    assert abs(cdf([0, 0], [0, 0], cov) - hits / n) < 1e-3


def test_trivariate_orthant_formula():
    # P(X <= 0) = 1/8 + (asin r12 + asin r13 + asin r23) / (4 pi)
    r = (0.3, -0.2, 0.6)
    cov = np.array([[1, r[0], r[1]], [r[0], 1, r[2]], [r[1], r[2], 1]])
    exact = 0.125 + sum(np.arcsin(r)) / (4 * np.pi)
    assert cdf(np.zeros(3), np.zeros(3), cov) == pytest.approx(exact, abs=1e-4)


def test_degenerate_coordinates():
    # zero variance coordinate resolved by sign, ties included
    cov = np.diag([1.0, 0.0])
    assert cdf([0.0, 0.0], [0.0, 0.0], cov) == pytest.approx(0.5)
    assert cdf([0.0, -1e-3], [0.0, 0.0], cov) == 0.0
    assert cdf([0.0], [0.0], [[0.0]]) == 1.0
    # perfectly correlated pair reduces to one dimension
    cov = np.ones((2, 2))
    assert cdf([0.3, 1.0], [0.0, 0.0], cov) == pytest.approx(ndtr(0.3), abs=1e-6)


def test_rank_deficient_against_monte_carlo(rng):
    cov = random_psd(rng, 4, 2)
    u = rng.normal(size=4)
    x = rng.multivariate_normal(np.zeros(4), cov, size=2_000_000, method="eigh")
    p = np.mean(np.all(x <= u, axis=1))
    se = np.sqrt(p * (1 - p) / len(x))
    assert abs(cdf(u, np.zeros(4), cov) - p) < max(1e-3, 4 * se)


def test_permutation_invariance(rng):
    d = 4
    cov = random_pd(rng, d)
    u, mu = rng.normal(size=d), rng.normal(size=d)
    perm = rng.permutation(d)
    a = cdf(u, mu, cov)
    b = cdf(u[perm], mu[perm], cov[np.ix_(perm, perm)])
    assert a == pytest.approx(b, rel=3e-4, abs=3e-6)


def test_deterministic_for_seed(rng):
    cov = random_pd(rng, 3)
    ctrl = CdfControl.fixed(points=2**10, seed=3)
    assert cdf([0.1, 0.2, 0.3], np.zeros(3), cov, ctrl) == cdf([0.1, 0.2, 0.3], np.zeros(3), cov, ctrl)


def test_batch_matches_single(rng):
    d, B = 3, 5
    cov = np.array([random_pd(rng, d) for _ in range(B)])
    u, mu = rng.normal(size=(B, d)), rng.normal(size=(B, d))
    ctrl = CdfControl.fixed(points=2**12)
    batch = cdf_batch(u, mu, cov, ctrl)
    single = [cdf(u[i], mu[i], cov[i], ctrl) for i in range(B)]
    np.testing.assert_allclose(batch, single, rtol=1e-12)


def test_tolerance_unreachable():
    ctrl = CdfControl(rel_tol=1e-9, min_points=2**8, max_points=2**8)
    cov = np.array([[1.0, 0.3, 0.1], [0.3, 1.0, 0.2], [0.1, 0.2, 1.0]])
    with pytest.raises(ToleranceUnreachable) as info:
        cdf([0.1, 0.2, 0.3], np.zeros(3), cov, ctrl)
    assert 0 < info.value.estimate[0] < 1


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        cdf([0.0, 0.0], [0.0], np.eye(2))


def test_control_validation():
    with pytest.raises(ValueError):
        CdfControl(rel_tol=0.5)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 5), st.integers(0, 2**31 - 1), st.floats(0.01, 2.0))
def test_monotone_in_upper(d, seed, bump):
    rng = np.random.default_rng(seed)
    cov = random_pd(rng, d)
    u = rng.normal(size=d)
    ctrl = CdfControl.fixed(points=2**11)
    k = int(rng.integers(d))
    v = u.copy()
    v[k] += bump
    # common random numbers make the estimate monotone up to round-off
    assert cdf(v, np.zeros(d), cov, ctrl) >= cdf(u, np.zeros(d), cov, ctrl) - 1e-12
