"""Agent-level simulation of one-shot and repeated signaling games.

Every round draws a fresh population (short-lived receivers): priors
mu_0i ~ N(mu_h, Sigma_h), a signal per agent (or one shared signal), a
Bayesian update, and an argmin over the agent's routes of posterior
expected cost. In the repeated game the sender reuses the last outcome as
the next signal mean.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .designer import DESIGN_CONTROL, SelfMap
from .errors import NoConvergence, TooShort
from .game import FlowVector, edge_costs, edge_flow, route_costs, social_cost
from .gaussian import GaussianDist, LinearGaussianObs, gain, posterior
from .prediction import SignalPolicy

log = logging.getLogger(__name__)

CONVERGED, OSCILLATING, UNDECIDED = "converged", "oscillating", "undecided"


@dataclass(frozen=True)
class SimConfig:
    """Simulation settings.

    ``signal_mode`` is ``"per_agent"`` (each receiver gets an independent
    signal draw) or ``"shared"`` (one draw per round for everybody).
    ``mode`` selects ``"expectation"`` (deterministic large-population
    dynamics) or ``"sampled"`` (finite agents) for repeated play.
    """

    seed: int = 0
    num_iterations_tau: int = 50
    signal_mode: str = "per_agent"
    mode: str = "expectation"
    oscillation_window: int = 10
    oscillation_tol: float = 0.02
    cdf_ctrl: object = DESIGN_CONTROL
    spread: str = "choice"

    def __post_init__(self):
        if self.num_iterations_tau < 1:
            raise ValueError("num_iterations_tau must be positive")
        if self.oscillation_window < 2:
            raise ValueError("oscillation_window must be >= 2")
        if self.oscillation_tol <= 0:
            raise ValueError("oscillation_tol must be positive")
        if self.signal_mode not in ("per_agent", "shared"):
            raise ValueError("signal_mode must be 'per_agent' or 'shared'")
        if self.mode not in ("expectation", "sampled"):
            raise ValueError("mode must be 'expectation' or 'sampled'")


@dataclass(frozen=True)
class RoundRecord:
    iteration: int
    mu_s: np.ndarray
    flow: FlowVector
    route_cost: np.ndarray
    social_cost: float


@dataclass
class Trajectory:
    rounds: list = field(default_factory=list)
    classification: str = UNDECIDED

    def __len__(self):
        return len(self.rounds)

    @property
    def edge_flows(self):
        return np.array([r.flow.edge_flow_f for r in self.rounds])

    @property
    def signal_means(self):
        return np.array([r.mu_s for r in self.rounds])

    @property
    def social_costs(self):
        return np.array([r.social_cost for r in self.rounds])


def _rng(seed):
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _gaussian_draws(rng, mean, cov, size):
    # eigen-factor with round-off negatives clipped, so singular covariances are fine
    w, v = np.linalg.eigh(cov)
    factor = v * np.sqrt(np.clip(w, 0.0, None))
    return mean + rng.standard_normal((size, len(mean))) @ factor.T


def sample_priors(beliefs, n, seed=None):
    """n i.i.d. prior means mu_0i ~ N(mu_h, Sigma_h), shape (n, m)."""
    return _gaussian_draws(_rng(seed), beliefs.mu_h, beliefs.Sigma_h, n)


def agent_choice(game, mu_0i, Sigma_0, s, Sigma_s, k):
    """Route (global index) of least posterior expected cost for one agent.

    Ties go to the lowest route index.
    """
    prior = GaussianDist(mu_0i, Sigma_0)
    post = posterior(prior, LinearGaussianObs.identity(Sigma_s), s)
    phi = route_costs(game, edge_costs(game, post.mean))
    sl = game.pair_slices[k]
    return sl.start + int(np.argmin(phi[sl]))


def choose_routes(game, priors, signals, Sigma_0, Sigma_s, pairs):
    """Vectorized :func:`agent_choice` for a population.

    The posterior mean under an identity observation is
    mu_0i + K (s_i - mu_0i) with K the gain of the update, so one gain
    serves every agent.
    """
    K = gain(Sigma_0, LinearGaussianObs.identity(Sigma_s))
    means = priors + (signals - priors) @ K.T
    phi = route_costs(game, edge_costs(game, means))
    choices = np.empty(len(priors), dtype=int)
    for k, sl in enumerate(game.pair_slices):
        idx = np.flatnonzero(pairs == k)
        # argmin returns the first minimum: lowest route index on ties
        choices[idx] = sl.start + np.argmin(phi[idx, sl], axis=1)
    return choices


def realize_flow(game, h):
    f = edge_flow(game, h)
    phi = route_costs(game, edge_costs(game, f))
    return FlowVector(h, f), phi, social_cost(game, phi, h)


@dataclass(frozen=True)
class OneShotResult:
    flow: FlowVector
    route_cost: np.ndarray
    social_cost: float
    choices: np.ndarray


def play_one_shot(game, beliefs, policy, config=SimConfig(), seed=None):
    """Play one signaling round with a fresh population of ``game.num_agents`` agents."""
    rng = _rng(config.seed if seed is None else seed)
    n = game.num_agents
    pairs = game.agent_pairs()
    priors = sample_priors(beliefs, n, rng)
    if config.signal_mode == "shared":
        signals = np.broadcast_to(_gaussian_draws(rng, policy.mu_s, policy.Sigma_s, 1), priors.shape)
    else:
        signals = _gaussian_draws(rng, policy.mu_s, policy.Sigma_s, n)
    choices = choose_routes(game, priors, signals, beliefs.Sigma_0, policy.Sigma_s, pairs)
    h = np.bincount(choices, minlength=game.M).astype(float)
    flow, phi, sc = realize_flow(game, h)
    return OneShotResult(flow, phi, sc, choices)


def play_repeated(game, beliefs, Sigma_s, init_mu_s, config=SimConfig()):
    """Repeated game with mu_s^t = f^{t-1}; returns a classified trajectory.

    Expectation mode iterates the predicted outcome map (identical to
    iterating :class:`~sfsignal.designer.SelfMap`); sampled mode plays each
    round with finite agents drawn from a per-run generator.
    """
    rng = np.random.default_rng(config.seed)
    gmap = SelfMap(game, beliefs, Sigma_s, config.cdf_ctrl, config.spread)
    mu = np.asarray(init_mu_s, dtype=float)
    traj = Trajectory()
    for t in range(1, config.num_iterations_tau + 1):
        if config.mode == "expectation":
            h = gmap.route_flow(mu)
        else:
            h = play_one_shot(game, beliefs, SignalPolicy(mu, Sigma_s), config, rng).flow.route_flow_h
        flow, phi, sc = realize_flow(game, h)
        traj.rounds.append(RoundRecord(t, mu, flow, phi, sc))
        mu = flow.edge_flow_f
    if len(traj) >= config.oscillation_window:
        traj.classification = detect_oscillation(
            traj.edge_flows, config.oscillation_window, config.oscillation_tol,
            game.num_agents)
    return traj


def detect_oscillation(series, window, tol, scale):
    """Classify the tail of a flow series.

    converged: every component varies by at most ``tol * scale`` over the
    last ``window`` points. oscillating: it varies more, and two
    non-adjacent tail points are within ``tol * scale`` of each other (the
    sequence keeps revisiting a neighbourhood). Otherwise undecided.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    if len(series) < window:
        raise TooShort(f"need at least {window} points, got {len(series)}")
    tail = series[-window:]
    thresh = tol * scale
    spread = np.max(tail.max(axis=0) - tail.min(axis=0))
    if spread <= thresh:
        return CONVERGED
    d = np.max(np.abs(tail[:, None, :] - tail[None, :, :]), axis=2)
    i, j = np.triu_indices(window, k=2)
    if np.min(d[i, j]) < thresh:
        return OSCILLATING
    return UNDECIDED


# ---------------------------------------------------------------------------
# complete-information baseline
# ---------------------------------------------------------------------------

def rosenthal_potential(game, f):
    """sum_e sum_{j=1}^{f_e} c_e(j) for separable affine costs."""
    lam = np.diag(game.cost_slope_Lambda)
    return float(np.sum(lam * f * (f + 1) / 2 + game.cost_offset_b * f))


@dataclass(frozen=True)
class BaselineResult:
    flow: FlowVector
    social_cost: float
    choices: np.ndarray
    moves: int
    converged: bool
    potential: np.ndarray


def initial_profile(game):
    """Every agent starts on the first route of its pair."""
    return np.array([game.pair_slices[k].start for k in game.agent_pairs()], dtype=int)


def best_response_dynamics(game, choices=None, max_rounds=1000, max_moves=None):
    """Round-robin improving moves by atomic agents.

    Each agent in index order switches to its best route whenever that
    strictly lowers its realized cost. Stops at a pure Nash (Wardrop-type)
    equilibrium, after ``max_rounds`` full sweeps, or after ``max_moves``
    moves. The Rosenthal potential after every move is recorded.
    """
    Lam = game.cost_slope_Lambda
    if np.any(np.diag(Lam) < 0):
        log.warning("negative cost slopes: best-response dynamics may cycle")
    D = game.incidence_D
    choices = initial_profile(game) if choices is None else np.array(choices, dtype=int)
    pairs = game.agent_pairs()
    h = np.bincount(choices, minlength=game.M).astype(float)
    f = D @ h
    c = Lam @ f + game.cost_offset_b
    potential = [rosenthal_potential(game, f)]
    moves = 0
    eps = 1e-12 * max(1.0, float(np.max(np.abs(c))))
    for _ in range(max_rounds):
        moved = False
        for i in range(len(choices)):
            r = choices[i]
            sl = game.pair_slices[pairs[i]]
            cand = D[:, sl]
            # edge costs after removing agent i, then cost of joining each route
            c_wo = c - Lam @ D[:, r]
            cost_new = cand.T @ c_wo + np.einsum("er,ef,fr->r", cand, Lam, cand)
            best = sl.start + int(np.argmin(cost_new))
            if best != r and cost_new[best - sl.start] < cost_new[r - sl.start] - eps:
                choices[i] = best
                f += D[:, best] - D[:, r]
                c = Lam @ f + game.cost_offset_b
                moves += 1
                moved = True
                potential.append(rosenthal_potential(game, f))
                if max_moves is not None and moves >= max_moves:
                    return choices, moves, False, np.array(potential)
        if not moved:
            return choices, moves, True, np.array(potential)
    return choices, moves, False, np.array(potential)


def wardrop_baseline(game, max_rounds=1000, choices=None):
    """Complete-information equilibrium by best-response dynamics.

    Raises:
        NoConvergence: ``max_rounds`` sweeps without reaching equilibrium.
    """
    choices, moves, converged, potential = best_response_dynamics(game, choices, max_rounds)
    h = np.bincount(choices, minlength=game.M).astype(float)
    flow, _, sc = realize_flow(game, h)
    res = BaselineResult(flow, sc, choices, moves, converged, potential)
    if not converged:
        raise NoConvergence(f"best-response dynamics still moving after {max_rounds} rounds", res)
    return res
