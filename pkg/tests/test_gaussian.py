import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfsignal.errors import DimensionMismatch, ZeroRank
from sfsignal.gaussian import (GaussianDist, LinearGaussianObs, marginal, pinv_psd,
                               posterior, posterior_precision_form, reduce, restore)

from conftest import random_pd, random_psd


def test_equal_precision_fusion():
    prior = GaussianDist(np.zeros(2), np.eye(2))
    post = posterior(prior, LinearGaussianObs.identity(np.eye(2)), np.zeros(2))
    np.testing.assert_allclose(post.mean, 0, atol=1e-15)
    np.testing.assert_allclose(post.cov, 0.5 * np.eye(2), atol=1e-15)


def test_scalar_precision_weighting():
    prior = GaussianDist([0.3], [[0.04]])
    post = posterior(prior, LinearGaussianObs.identity([[0.0484]]), [0.62])
    prec = 1 / 0.0484 + 1 / 0.04
    assert post.mean[0] == pytest.approx((0.62 / 0.0484 + 0.3 / 0.04) / prec, rel=1e-12)
    assert post.cov[0, 0] == pytest.approx(1 / prec, rel=1e-12)


def test_posterior_matches_importance_sampling(rng):
    d = 3
    prior = GaussianDist(rng.normal(size=d), random_pd(rng, d))
    A = rng.normal(size=(2, d))
    noise = random_pd(rng, 2)
    obs = LinearGaussianObs(A, rng.normal(size=2), noise)
    y = rng.normal(size=2)
    post = posterior(prior, obs, y)
    # draw from the prior, weight by the likelihood
    x = rng.multivariate_normal(prior.mean, prior.cov, size=10**6)
    r = y - x @ A.T - obs.offset_b
    logw = -0.5 * np.einsum("ni,ij,nj->n", r, np.linalg.inv(noise), r)
    w = np.exp(logw - logw.max())
    w /= w.sum()
    mean = w @ x
    cov = (x - mean).T @ ((x - mean) * w[:, None])
    scale = np.sqrt(np.diag(post.cov))
    np.testing.assert_allclose(mean, post.mean, atol=1e-2 * np.max(scale) + 1e-2 * np.abs(post.mean).max())
    np.testing.assert_allclose(cov, post.cov, rtol=1e-2, atol=1e-2 * np.max(np.diag(post.cov)))


def test_gain_form_equals_precision_form(rng):
    for _ in range(20):
        d, k = rng.integers(1, 6, size=2)
        prior = GaussianDist(rng.normal(size=d), random_pd(rng, d))
        obs = LinearGaussianObs(rng.normal(size=(k, d)), rng.normal(size=k), random_pd(rng, k))
        y = rng.normal(size=k)
        a, b = posterior(prior, obs, y), posterior_precision_form(prior, obs, y)
        np.testing.assert_allclose(a.mean, b.mean, rtol=1e-8, atol=1e-10)
        np.testing.assert_allclose(a.cov, b.cov, rtol=1e-8, atol=1e-10)


def test_posterior_dimension_mismatch():
    prior = GaussianDist(np.zeros(2), np.eye(2))
    with pytest.raises(DimensionMismatch):
        posterior(prior, LinearGaussianObs.identity(np.eye(3)), np.zeros(3))
    with pytest.raises(DimensionMismatch):
        posterior(prior, LinearGaussianObs.identity(np.eye(2)), np.zeros(3))


def test_marginal_examples():
    m = marginal(GaussianDist(np.zeros(2), np.eye(2)), LinearGaussianObs.identity(np.eye(2)))
    np.testing.assert_allclose(m.cov, 2 * np.eye(2))
    m = marginal(GaussianDist([1.0], [[1.0]]), LinearGaussianObs([[2.0]], [3.0], [[4.0]]))
    assert m.mean[0] == pytest.approx(5.0)
    assert m.cov[0, 0] == pytest.approx(8.0)


def test_marginal_sampling_oracle(rng):
    d = 3
    prior = GaussianDist(rng.normal(size=d), random_pd(rng, d))
    obs = LinearGaussianObs(rng.normal(size=(2, d)), rng.normal(size=2), random_pd(rng, 2))
    m = marginal(prior, obs)
    n = 400_000
    x = rng.multivariate_normal(prior.mean, prior.cov, size=n)
    y = x @ obs.map_A.T + obs.offset_b + rng.multivariate_normal(np.zeros(2), obs.noise_cov_Linv, size=n)
    se = np.sqrt(np.diag(m.cov) / n)
    assert np.all(np.abs(y.mean(axis=0) - m.mean) < 4 * se)
    np.testing.assert_allclose(np.cov(y.T), m.cov, rtol=2e-2, atol=1e-2)


def test_marginal_of_hierarchical_signal_model(rng):
    """Marginalizing the prior mean out of the posterior-mean map gives the aggregate belief."""
    d = 3
    mu_h, S_h, S_0, S_s = rng.normal(size=d), random_pd(rng, d), random_pd(rng, d), random_pd(rng, d)
    mu_s = rng.normal(size=d)
    W_s = S_0 @ np.linalg.inv(S_0 + S_s)
    W_0 = S_s @ np.linalg.inv(S_0 + S_s)
    # posterior mean = W_0 mu_0 + W_s s; mu_0 ~ N(mu_h, S_h) and s ~ N(mu_s, S_s)
    inner = marginal(GaussianDist(mu_h, S_h), LinearGaussianObs(W_0, W_s @ mu_s, W_s @ S_s @ W_s.T))
    np.testing.assert_allclose(inner.mean, mu_h + W_s @ (mu_s - mu_h), atol=1e-12)
    np.testing.assert_allclose(inner.cov, W_s @ S_s @ W_s.T + W_0 @ S_h @ W_0.T, atol=1e-12)


def test_information_reduces_trace(rng):
    for _ in range(20):
        d = int(rng.integers(1, 6))
        prior = GaussianDist(rng.normal(size=d), random_pd(rng, d))
        post = posterior(prior, LinearGaussianObs.identity(random_pd(rng, d)), rng.normal(size=d))
        assert np.trace(post.cov) <= np.trace(prior.cov) + 1e-12
        assert np.linalg.eigvalsh(post.cov).min() >= -1e-12


def test_reduce_axis_aligned():
    space = reduce(GaussianDist(np.zeros(2), np.diag([1.0, 0.0])))
    assert space.dim == 1
    np.testing.assert_allclose(np.abs(space.transform_C), [[1.0, 0.0]])


def test_reduce_full_rank_is_noop(rng):
    cov = random_pd(rng, 3)
    space = reduce(GaussianDist(np.zeros(3), cov), cutoff=0.5 * np.linalg.eigvalsh(cov).min())
    assert space.dim == 3


def test_reduce_rank_one_reconstruction(rng):
    v = rng.normal(size=4)
    dist = GaussianDist(rng.normal(size=4), np.outer(v, v))
    space = reduce(dist)
    assert space.dim == 1
    x = dist.mean + rng.normal(size=(1000, 1)) * v
    assert np.max(np.abs(restore(space, space.project(x)) - x)) < 1e-8
    np.testing.assert_allclose(space.transform_C @ space.transform_C.T, np.eye(1), atol=1e-10)


def test_restore_center_and_roundtrip(rng):
    cov = random_psd(rng, 5, 2)
    mu = rng.normal(size=5)
    space = reduce(GaussianDist(mu, cov))
    np.testing.assert_allclose(restore(space, np.zeros(space.dim)), mu)
    x = mu + cov @ rng.normal(size=5)
    np.testing.assert_allclose(restore(space, space.project(x)), x, atol=1e-8)
    # dense pseudo-inverse oracle for the projector onto the span
    proj = cov @ np.linalg.pinv(cov)
    y = rng.normal(size=5)
    np.testing.assert_allclose(restore(space, space.project(mu + y)) - mu, proj @ y, atol=1e-8)
    with pytest.raises(DimensionMismatch):
        restore(space, np.zeros(3))


def test_zero_rank():
    with pytest.raises(ZeroRank):
        reduce(GaussianDist(np.zeros(2), np.zeros((2, 2))))


def test_pinv_psd_matches_numpy(rng):
    cov = random_psd(rng, 6, 3)
    np.testing.assert_allclose(pinv_psd(cov), np.linalg.pinv(cov, hermitian=True), rtol=1e-6, atol=1e-8)


def test_rank_deficient_posterior_equals_reduced_space(rng):
    """Updating a singular prior equals updating its reduced representation."""
    d, r = 5, 2
    prior = GaussianDist(rng.normal(size=d), random_psd(rng, d, r))
    noise = random_pd(rng, d)
    y = rng.normal(size=d)
    full = posterior(prior, LinearGaussianObs.identity(noise), y)
    space = reduce(prior)
    C = space.transform_C
    small_prior = GaussianDist(np.zeros(r), space.reduced_cov)
    small = posterior(small_prior, LinearGaussianObs(C.T, prior.mean, noise), y)
    np.testing.assert_allclose(full.mean, restore(space, small.mean), atol=1e-8)
    np.testing.assert_allclose(full.cov, C.T @ small.cov @ C, atol=1e-8)


def test_rank_deficient_posterior_sampling(rng):
    """Rank-deficient prior: moments agree with a sampling oracle within 3 standard errors."""
    d = 4
    prior = GaussianDist(rng.normal(size=d), random_psd(rng, d, 2))
    noise = random_pd(rng, d)
    post = posterior(prior, LinearGaussianObs.identity(noise), rng.normal(size=d))
    # conditional sampling: joint draws of (x, y), regress x on y
    n = 400_000
    x = rng.multivariate_normal(prior.mean, prior.cov, size=n, method="eigh")
    y = x + rng.multivariate_normal(np.zeros(d), noise, size=n)
    K = np.cov(x.T, y.T)[:d, d:] @ np.linalg.inv(np.cov(y.T))
    resid = x - y @ K.T
    np.testing.assert_allclose(np.cov(resid.T), post.cov, atol=3 * np.sqrt(2 / n) * np.max(np.diag(prior.cov)) * 3)


def test_gaussian_dist_validation():
    with pytest.raises(ValueError):
        GaussianDist([0.0, 0.0], [[1.0, 0.5], [0.4, 1.0]])
    with pytest.raises(ValueError):
        GaussianDist([0.0, 0.0], [[1.0, 0.0], [0.0, -1.0]])
    with pytest.raises(DimensionMismatch):
        GaussianDist([0.0], np.eye(2))
    d = GaussianDist([0.0], [[1.0]])
    with pytest.raises(ValueError):
        d.mean[0] = 1.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_marginal_mean_is_affine(d, seed):
    rng = np.random.default_rng(seed)
    prior = GaussianDist(rng.normal(size=d), random_pd(rng, d))
    k = int(rng.integers(1, 4))
    obs = LinearGaussianObs(rng.normal(size=(k, d)), rng.normal(size=k), random_pd(rng, k))
    np.testing.assert_allclose(marginal(prior, obs).mean, obs.map_A @ prior.mean + obs.offset_b, rtol=1e-12, atol=1e-12)
