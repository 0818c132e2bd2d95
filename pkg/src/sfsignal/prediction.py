"""Large-population prediction of the outcome flow induced by a Gaussian signal.

Receivers hold priors N(mu_0i, Sigma_0) with mu_0i ~ N(mu_h, Sigma_h), see a
signal s ~ N(mu_s, Sigma_s) that they believe is N(f, Sigma_s), and pick the
route of least posterior expected cost. Across the population the posterior
mean is Gaussian, which makes every route-choice probability a multivariate
normal orthant probability of cost differences.

Two spreads of the aggregate belief are supported:

``"choice"``
    Covariance of the receivers' posterior *means*. This is the
    distribution that the argmin in the route choice actually sees, and it
    agrees with agent-level simulation.
``"predictive"``
    Adds the posterior covariance itself (the fully marginalized
    predictive distribution of f). The minority-game closed forms for the
    self-fulfilling mean and the variance bound are written in this
    convention.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, UnknownRoute
from .game import FlowVector, edge_flow
from .gaussian import GaussianDist, clip_psd, pinv_psd, symmetrize
from .mvn import CdfControl, cdf_batch

SPREADS = ("choice", "predictive")

PREDICTION_CONTROL = CdfControl(rel_tol=1e-4, min_points=2**12, max_points=2**18,
                                strict=False)


def _psd(x, m, what):
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape != (m, m):
        raise DimensionMismatch(f"{what} must be {m}x{m}, got {x.shape}")
    return symmetrize(x)


@dataclass(frozen=True)
class BeliefParams:
    """Population belief parameters in edge-flow space."""

    mu_h: np.ndarray
    Sigma_h: np.ndarray
    Sigma_0: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu_h, dtype=float))
        m = mu.size
        object.__setattr__(self, "mu_h", mu)
        object.__setattr__(self, "Sigma_h", _psd(self.Sigma_h, m, "Sigma_h"))
        object.__setattr__(self, "Sigma_0", _psd(self.Sigma_0, m, "Sigma_0"))

    @property
    def m(self):
        return self.mu_h.size


@dataclass(frozen=True)
class SignalPolicy:
    """Signal distribution N(mu_s, Sigma_s); Sigma_s is also the committed noise."""

    mu_s: np.ndarray
    Sigma_s: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu_s, dtype=float))
        object.__setattr__(self, "mu_s", mu)
        object.__setattr__(self, "Sigma_s", _psd(self.Sigma_s, mu.size, "Sigma_s"))


@dataclass(frozen=True)
class ChoiceProbabilities:
    """Per-pair route choice probabilities.

    ``p`` is indexed by global route; each pair's block sums to one after
    renormalization. ``raw_residual[k]`` is the pre-normalization sum minus one.
    """

    p: np.ndarray
    raw_residual: np.ndarray

    def for_pair(self, game, k):
        return self.p[game.pair_slices[k]]


@dataclass(frozen=True)
class PosteriorWeights:
    """Linear maps from (mu_s, mu_h) to the population-average posterior mean.

    mean = mu_h + signal_weight @ (mu_s - mu_h); posterior_cov is the
    covariance every receiver ends up with.
    """

    signal_weight: np.ndarray
    prior_weight: np.ndarray
    posterior_cov: np.ndarray


def posterior_weights(Sigma_0, Sigma_s):
    """Gain-form weights Sigma Sigma_s^-1 = Sigma_0 (Sigma_0 + Sigma_s)^+ etc.

    Only Sigma_0 + Sigma_s is inverted, on its range, so singular beliefs
    and signals that share a span are handled without regularization.
    """
    S_inv = pinv_psd(Sigma_0 + Sigma_s)
    Ws = Sigma_0 @ S_inv
    W0 = Sigma_s @ S_inv
    post = clip_psd(Sigma_0 @ S_inv @ Sigma_s)
    return PosteriorWeights(Ws, W0, post)


def aggregate_flow_belief(beliefs, policy, spread="choice", weights=None):
    """Population distribution of the receivers' posterior flow belief.

    Returns N(mu_bar, Sigma_bar) with mu_bar = W_s mu_s + W_0 mu_h, where
    W_s = Sigma Sigma_s^-1 and W_0 = Sigma Sigma_0^-1 (Sigma the posterior
    covariance), and Sigma_bar = W_s Sigma_s W_s^T + W_0 Sigma_h W_0^T, plus
    Sigma when ``spread == "predictive"``.
    """
    if spread not in SPREADS:
        raise ValueError(f"spread must be one of {SPREADS}")
    if policy.mu_s.size != beliefs.m:
        raise DimensionMismatch(
            f"signal dimension {policy.mu_s.size} != belief dimension {beliefs.m}")
    if weights is None:
        weights = posterior_weights(beliefs.Sigma_0, policy.Sigma_s)
    Ws, W0 = weights.signal_weight, weights.prior_weight
    mean = beliefs.mu_h + Ws @ (policy.mu_s - beliefs.mu_h)
    cov = Ws @ policy.Sigma_s @ Ws.T + W0 @ beliefs.Sigma_h @ W0.T
    if spread == "predictive":
        cov = cov + weights.posterior_cov
    return GaussianDist(mean, clip_psd(cov))


def route_cost_distribution(game, flow_belief):
    """Push a flow belief through c = Lambda f + b and phi = D^T c."""
    if flow_belief.dim != game.m:
        raise DimensionMismatch(
            f"flow belief has dimension {flow_belief.dim}, game has {game.m} edges")
    D, Lam = game.incidence_D, game.cost_slope_Lambda
    mean = D.T @ (Lam @ flow_belief.mean + game.cost_offset_b)
    T = D.T @ Lam
    return GaussianDist(mean, clip_psd(T @ flow_belief.cov @ T.T))


def comparison_matrix(game, k, r):
    """Rows phi_r - phi_r' for every other route r' of pair ``k`` (r is local)."""
    if not 0 <= k < len(game.od_pairs):
        raise UnknownRoute(f"no OD pair {k}")
    sl = game.pair_slices[k]
    n_routes = sl.stop - sl.start
    if not 0 <= r < n_routes:
        raise UnknownRoute(f"pair {k} has no route {r}")
    others = [sl.start + j for j in range(n_routes) if j != r]
    B = np.zeros((len(others), game.M))
    B[:, sl.start + r] = 1.0
    B[np.arange(len(others)), others] = -1.0
    return B


def _comparison_problems(game, cost):
    """Group (route, mean diff, cov diff) cdf problems by dimension."""
    groups = {}
    mu, S = cost.mean, cost.cov
    for k, sl in enumerate(game.pair_slices):
        idx = np.arange(sl.start, sl.stop)
        if idx.size < 2:
            continue
        for j, r in enumerate(idx):
            others = np.delete(idx, j)
            mean = mu[r] - mu[others]
            cov = (S[r, r] - S[r, others][None, :] - S[others, r][:, None]
                   + S[np.ix_(others, others)])
            g = groups.setdefault(others.size, ([], [], []))
            g[0].append(r)
            g[1].append(mean)
            g[2].append(cov)
    return groups


def choice_probabilities_from_costs(game, cost, cdf_ctrl=PREDICTION_CONTROL):
    """p_rk = P(B_rk phi <= 0) for phi ~ ``cost``; single-route pairs get 1."""
    p = np.ones(game.M)
    for dim, (routes, means, covs) in _comparison_problems(game, cost).items():
        means = np.array(means)
        p[routes] = cdf_batch(np.zeros_like(means), means, np.array(covs), cdf_ctrl)
    residual = np.zeros(len(game.od_pairs))
    for k, sl in enumerate(game.pair_slices):
        total = p[sl].sum()
        residual[k] = total - 1.0
        if total > 0:
            p[sl] /= total
        else:
            p[sl] = 1.0 / (sl.stop - sl.start)
    return ChoiceProbabilities(p, residual)


def route_choice_probabilities(game, beliefs, policy, cdf_ctrl=PREDICTION_CONTROL,
                               spread="choice", weights=None):
    flow = aggregate_flow_belief(beliefs, policy, spread, weights)
    return choice_probabilities_from_costs(game, route_cost_distribution(game, flow), cdf_ctrl)


def predict_outcome_flow(game, beliefs, policy, cdf_ctrl=PREDICTION_CONTROL,
                         spread="choice", weights=None):
    """Expected outcome: h_rk = n_k p_rk and f = D h."""
    probs = route_choice_probabilities(game, beliefs, policy, cdf_ctrl, spread, weights)
    h = probs.p * game.demands[game.route_pair]
    return FlowVector(h, edge_flow(game, h))
