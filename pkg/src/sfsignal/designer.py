"""Self-fulfilling signal design: fixed points of the signal-to-outcome map and
their linear stability.

The self-map sends a signal mean mu_s to the predicted outcome flow
g(mu_s) = D [p_rk(mu_s)] n. A signal is self-fulfilling when mu_s = g(mu_s),
and the repeated process f^t = g(f^{t-1}) settles on such a point when the
Jacobian of g there has spectral radius below one.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoConvergence, NoStableScale
from .game import edge_flow
from .gaussian import range_basis, symmetrize
from .mvn import CdfControl
from .prediction import (BeliefParams, SignalPolicy, aggregate_flow_belief,
                         choice_probabilities_from_costs, posterior_weights,
                         route_cost_distribution)

log = logging.getLogger(__name__)

STABILITY_MARGIN = 1e-3
DESIGN_CONTROL = CdfControl.fixed(points=2**12)


@dataclass(frozen=True)
class FixedPointResult:
    mu_s0: np.ndarray
    residual: float
    iterations: int
    converged: bool
    damping: float = 1.0


@dataclass(frozen=True)
class StabilityReport:
    """Linearization of g at a fixed point.

    ``eigenvalues`` are those of the Jacobian restricted to the reduced flow
    space (the only directions g responds to); the remaining eigenvalues of
    the embedded m x m ``jacobian`` are zero.
    """

    jacobian: np.ndarray
    eigenvalues: np.ndarray
    spectral_radius: float
    stable: bool
    marginal: bool


class SelfMap:
    """g(mu_s) for a fixed game, belief and signal covariance.

    The signal covariance fixes the posterior weights and the covariance of
    the route-cost comparison, so both are computed once here; only the
    means move with mu_s.
    """

    def __init__(self, game, beliefs, Sigma_s, cdf_ctrl=DESIGN_CONTROL, spread="choice"):
        if beliefs.m != game.m:
            raise DimensionMismatch(f"beliefs have dimension {beliefs.m}, game has {game.m} edges")
        self.game = game
        self.beliefs = beliefs
        self.Sigma_s = symmetrize(np.asarray(Sigma_s, dtype=float))
        self.cdf_ctrl = cdf_ctrl
        self.spread = spread
        self.weights = posterior_weights(beliefs.Sigma_0, self.Sigma_s)
        self.basis, _ = range_basis(beliefs.Sigma_0 + self.Sigma_s)
        self.evaluations = 0

    def policy(self, mu_s):
        return SignalPolicy(mu_s, self.Sigma_s)

    def route_flow(self, mu_s):
        flow = aggregate_flow_belief(self.beliefs, self.policy(mu_s), self.spread, self.weights)
        cost = route_cost_distribution(self.game, flow)
        probs = choice_probabilities_from_costs(self.game, cost, self.cdf_ctrl)
        self.evaluations += 1
        return probs.p * self.game.demands[self.game.route_pair]

    def __call__(self, mu_s):
        return edge_flow(self.game, self.route_flow(np.asarray(mu_s, dtype=float)))


def self_map_g(game, beliefs, Sigma_s, mu_s, cdf_ctrl=DESIGN_CONTROL, spread="choice"):
    """Predicted outcome edge flow for signal N(mu_s, Sigma_s)."""
    return SelfMap(game, beliefs, Sigma_s, cdf_ctrl, spread)(mu_s)


def _feasible(game, f):
    total = game.num_agents
    return np.all(f >= -1e-9) and np.all(f <= total + 1e-9)


def find_fixed_point(game, beliefs, Sigma_s, init_mu, tol=None, max_iter=500,
                     cdf_ctrl=DESIGN_CONTROL, spread="choice", gmap=None, raise_on_failure=True):
    """Damped iteration mu <- mu + a (g(mu) - mu) for a self-fulfilling signal mean.

    The step ``a`` starts at 1 and is halved (and the step rejected) whenever
    the sup-norm residual grows. It is also halved when successive steps point
    in opposite directions without the residual shrinking by 10%, the
    signature of a two-cycle around a repelling fixed point. This lets the
    iteration settle on fixed points that plain iteration orbits around.

    Args:
        init_mu: starting signal mean; an infeasible start is replaced by its
            image under g.
        tol: sup-norm residual target, default 1e-6 * (number of agents).
        gmap: optional prebuilt :class:`SelfMap` (reuses cached factors).

    Raises:
        NoConvergence: ``max_iter`` reached; the best iterate is attached.
    """
    g = gmap or SelfMap(game, beliefs, Sigma_s, cdf_ctrl, spread)
    if tol is None:
        tol = 1e-6 * game.num_agents
    mu = np.asarray(init_mu, dtype=float).copy()
    if mu.shape != (game.m,):
        raise DimensionMismatch(f"init_mu must have length {game.m}")
    gm = g(mu)
    if not _feasible(game, mu):
        mu, gm = gm, g(gm)
    step = gm - mu
    res = float(np.max(np.abs(step)))
    alpha = 1.0
    best = FixedPointResult(mu, res, 0, res <= tol, alpha)
    it = 0
    while res > tol and it < max_iter:
        it += 1
        cand = mu + alpha * step
        g_cand = g(cand)
        step_cand = g_cand - cand
        res_cand = float(np.max(np.abs(step_cand)))
        if res_cand > res:
            alpha *= 0.5
            if alpha < 1e-8:
                break
            continue
        # sign-alternating steps with poor contraction: orbiting a repelling point
        if res_cand > 0.9 * res and np.dot(step_cand, step) < 0:
            alpha *= 0.5
        mu, step, res = cand, step_cand, res_cand
        if res < best.residual:
            best = FixedPointResult(mu, res, it, res <= tol, alpha)
    best = FixedPointResult(best.mu_s0, best.residual, it, best.residual <= tol, alpha)
    log.debug("fixed point: residual %.3g after %d iterations (damping %.3g)",
              best.residual, it, alpha)
    if not best.converged and raise_on_failure:
        raise NoConvergence(
            f"residual {best.residual:.3g} > tol {tol:.3g} after {it} iterations", best)
    return best


def jacobian_at(game, beliefs, Sigma_s, mu_s0, fd_step=None, cdf_ctrl=DESIGN_CONTROL,
                spread="choice", gmap=None, reduced=False):
    """Central-difference Jacobian of g at ``mu_s0``.

    Differences are taken along an orthonormal basis C of the range of
    Sigma_0 + Sigma_s, the only directions g depends on. The reduced block
    C J C^T is returned when ``reduced`` is set, otherwise the embedded
    m x m Jacobian (dg/dmu_s along C) C.
    """
    g = gmap or SelfMap(game, beliefs, Sigma_s, cdf_ctrl, spread)
    if fd_step is None:
        fd_step = 1e-3 * game.num_agents
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    mu = np.asarray(mu_s0, dtype=float)
    C = g.basis
    cols = [(g(mu + fd_step * c) - g(mu - fd_step * c)) / (2 * fd_step) for c in C]
    K = np.column_stack(cols) if cols else np.zeros((game.m, 0))
    if reduced:
        return C @ K
    return K @ C


def stability(game, beliefs, Sigma_s, mu_s0, fd_step=None, cdf_ctrl=DESIGN_CONTROL,
              spread="choice", gmap=None, margin=STABILITY_MARGIN):
    """Spectral-radius certificate: stable iff max |lambda| < 1 - margin."""
    g = gmap or SelfMap(game, beliefs, Sigma_s, cdf_ctrl, spread)
    red = jacobian_at(game, beliefs, Sigma_s, mu_s0, fd_step, gmap=g, reduced=True)
    eig = np.linalg.eigvals(red) if red.size else np.zeros(0, dtype=complex)
    rho = float(np.max(np.abs(eig))) if eig.size else 0.0
    J = g.basis.T @ red @ g.basis
    return StabilityReport(J, eig, rho, rho < 1 - margin, abs(rho - 1) <= margin)


@dataclass(frozen=True)
class ScaleSearch:
    scale: float
    fixed_point: FixedPointResult
    report: StabilityReport
    lower: float
    lower_report: StabilityReport | None


def _certify(game, beliefs, Sigma_s, init, cdf_ctrl, spread, tol, max_iter):
    g = SelfMap(game, beliefs, Sigma_s, cdf_ctrl, spread)
    fp = find_fixed_point(game, beliefs, Sigma_s, init, tol=tol, max_iter=max_iter,
                          gmap=g, raise_on_failure=False)
    return fp, stability(game, beliefs, Sigma_s, fp.mu_s0, gmap=g)


def min_stable_signal_scale(game, beliefs, Sigma_s_base, init_mu=None, upper=1e6,
                            resolution=0.01, cdf_ctrl=DESIGN_CONTROL, spread="choice",
                            tol=None, max_iter=500):
    """Smallest scale a with a stable fixed point under a * Sigma_s_base.

    Scales are bracketed by doubling from 1 and then bisected geometrically
    until hi / lo <= 1 + resolution. As a grows the signal carries less
    information and g flattens, so a stable scale exists below ``upper``
    unless the game itself is degenerate.

    Raises:
        NoStableScale: no stable fixed point up to ``upper``.
    """
    base = symmetrize(np.asarray(Sigma_s_base, dtype=float))
    if not np.any(base):
        raise ValueError("Sigma_s_base must be nonzero")
    if init_mu is None:
        init_mu = beliefs.mu_h
    fp, rep = _certify(game, beliefs, base, init_mu, cdf_ctrl, spread, tol, max_iter)
    if rep.stable:
        return ScaleSearch(1.0, fp, rep, 1.0, None)
    lo, lo_rep, init = 1.0, rep, fp.mu_s0
    hi = 2.0
    while True:
        fp_hi, rep_hi = _certify(game, beliefs, hi * base, init, cdf_ctrl, spread, tol, max_iter)
        log.info("scale %.4g: spectral radius %.4f", hi, rep_hi.spectral_radius)
        if rep_hi.stable:
            break
        lo, lo_rep, init = hi, rep_hi, fp_hi.mu_s0
        if hi >= upper:
            raise NoStableScale(f"no stable fixed point for scales up to {upper:g}")
        hi = min(2 * hi, upper)
    while hi / lo > 1 + resolution:
        mid = np.sqrt(lo * hi)
        fp_mid, rep_mid = _certify(game, beliefs, mid * base, fp_hi.mu_s0, cdf_ctrl, spread,
                                   tol, max_iter)
        log.info("scale %.4g: spectral radius %.4f", mid, rep_mid.spectral_radius)
        if rep_mid.stable:
            hi, fp_hi, rep_hi = mid, fp_mid, rep_mid
        else:
            lo, lo_rep = mid, rep_mid
    return ScaleSearch(float(hi), fp_hi, rep_hi, float(lo), lo_rep)
