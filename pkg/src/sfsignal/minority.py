"""Two-route minority game in normalized flow omega = share of agents on route 1.

Costs are c(omega) = (2 omega - 1, 1 - 2 omega): the majority route costs
more. Every quantity here is a scalar reduction of the general network
pipeline, which :func:`mg_as_game` reconstructs for cross-checking.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq
from scipy.special import ndtr

from .errors import InvalidParams
from .game import GameDefinition, ODPair
from .prediction import SPREADS, BeliefParams, SignalPolicy


@dataclass(frozen=True)
class MgParams:
    """Scalar belief and signal parameters (standard deviations, not variances)."""

    mu_h: float = 0.3
    sigma_h: float = 0.2
    sigma_0: float = 0.2
    sigma_s: float = 0.22
    n: int = 81

    def __post_init__(self):
        if not 0.0 <= self.mu_h <= 1.0:
            raise InvalidParams("mu_h must lie in [0, 1]")
        if min(self.sigma_h, self.sigma_0, self.sigma_s) <= 0:
            raise InvalidParams("standard deviations must be positive")
        if self.n < 1:
            raise InvalidParams("n must be a positive integer")

    def with_sigma_s(self, sigma_s):
        return replace(self, sigma_s=sigma_s)


TABLE1 = MgParams()


def mg_costs(omega):
    """Edge (= route) costs at route-1 share omega."""
    return np.array([2 * omega - 1, 1 - 2 * omega])


def mg_belief_moments(params, mu_s, spread="choice"):
    """Mean and variance of the population belief about omega.

    mean = s2 (mu_s / sigma_s^2 + mu_h / sigma_0^2) with
    s2 = sigma_0^2 sigma_s^2 / (sigma_0^2 + sigma_s^2); the variance is
    s2^2 / sigma_s^2 + s2^2 sigma_h^2 / sigma_0^4, plus s2 for the
    predictive spread.
    """
    if spread not in SPREADS:
        raise ValueError(f"spread must be one of {SPREADS}")
    v0, vs, vh = params.sigma_0**2, params.sigma_s**2, params.sigma_h**2
    s2 = v0 * vs / (v0 + vs)
    mean = s2 * (mu_s / vs + params.mu_h / v0)
    var = s2**2 / vs + s2**2 * vh / v0**2
    if spread == "predictive":
        var += s2
    return mean, var


def mg_self_map(params, mu_s, spread="choice"):
    """Share of agents choosing route 1 under signal mean ``mu_s``.

    Route 1 is chosen when its expected cost difference 2 omega - 1 (mean
    2 mean - 1, variance 4 var) is non-positive.
    """
    if not -1e-12 <= mu_s <= 1 + 1e-12:
        raise InvalidParams("mu_s must lie in [0, 1]")
    mean, var = mg_belief_moments(params, mu_s, spread)
    mu_phi = 2.0 * mean - 1.0
    return float(ndtr(-mu_phi / (2.0 * math.sqrt(var))))


def mg_fixed_point(params, spread="choice"):
    """Root of mg_self_map(mu) = mu on [0, 1] (unique: the map is decreasing)."""
    return brentq(lambda m: mg_self_map(params, m, spread) - m, 0.0, 1.0, xtol=1e-14)


def mg_variance_bound(sigma_0, sigma_h):
    """Smallest signal deviation satisfying the closed-form stability condition.

    sigma_s^2 = [-4 pi s0^4 + sqrt(16 pi^2 s0^8 + 8 pi (s0^2 + sh^2) s0^4)]
                / [4 pi (s0^2 + sh^2)]
    """
    if sigma_0 <= 0 or sigma_h < 0:
        raise InvalidParams("need sigma_0 > 0 and sigma_h >= 0")
    v0, vh = sigma_0**2, sigma_h**2
    pi = math.pi
    num = -4 * pi * v0**2 + math.sqrt(16 * pi**2 * v0**4 + 8 * pi * (v0 + vh) * v0**2)
    return math.sqrt(num / (4 * pi * (v0 + vh)))


def mg_sender_utility(omega):
    """v(omega) = omega - omega^2, the negated total cost up to an affine map."""
    if not 0.0 <= omega <= 1.0:
        raise InvalidParams("omega must lie in [0, 1]")
    return omega - omega**2


def mg_total_cost(omega):
    """|c(omega)|^2, which equals 2 - 8 v(omega)."""
    return float(np.sum(mg_costs(omega) ** 2))


def _flip_cov(n, sigma):
    u = np.array([1.0, -1.0])
    return (n * sigma) ** 2 * np.outer(u, u)


def mg_as_game(params):
    """Embed the minority game as a 2-edge, 2-route network game.

    Lambda = diag(2/n, 2/n) and b = (-1, -1) make edge costs equal
    c(omega) in absolute flows f = (n omega, n (1 - omega)). Beliefs about
    (f_1, f_2) are degenerate along f_1 + f_2 = n.
    """
    n = params.n
    game = GameDefinition.build(
        num_nodes=2, edges=[(0, 1), (0, 1)], od_pairs=[ODPair(0, 1, n, 2)],
        cost_slope=np.array([2.0 / n, 2.0 / n]), cost_offset=np.array([-1.0, -1.0]),
        routes=[[(0,), (1,)]])
    beliefs = BeliefParams(n * np.array([params.mu_h, 1 - params.mu_h]),
                           _flip_cov(n, params.sigma_h), _flip_cov(n, params.sigma_0))
    return game, beliefs


def mg_signal_cov(params, sigma_s=None):
    return _flip_cov(params.n, params.sigma_s if sigma_s is None else sigma_s)


def mg_policy(params, mu_s):
    return SignalPolicy(params.n * np.array([mu_s, 1 - mu_s]), mg_signal_cov(params))


def to_flow(params, omega):
    return params.n * np.array([omega, 1 - omega])
