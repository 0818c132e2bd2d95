"""Composite experiments shared by the CLI and the acceptance suite."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .designer import SelfMap
from .simulator import SimConfig, play_repeated, realize_flow, wardrop_baseline

UNINFORMATIVE_SCALE = 1e6


@dataclass(frozen=True)
class EfficiencyComparison:
    no_signal: float
    unstable_signal: float
    stable_signal: float
    wardrop: float
    unstable_classification: str
    stable_classification: str

    def as_dict(self):
        return {"no signal": self.no_signal, "unstable signal": self.unstable_signal,
                "stable signal": self.stable_signal, "Wardrop UE": self.wardrop}


def no_signal_flow(game, beliefs, Sigma_s, config=SimConfig()):
    """Expected route flow when the signal carries no information."""
    gmap = SelfMap(game, beliefs, UNINFORMATIVE_SCALE * Sigma_s, config.cdf_ctrl, config.spread)
    return gmap.route_flow(beliefs.mu_h)


def efficiency_comparison(game, beliefs, Sigma_unstable, Sigma_stable, init_mu_s,
                          config=SimConfig(), burn_in=None):
    """Social cost without signal, under an unstable and a stable signal, and at equilibrium.

    The unstable signal is scored by its time-averaged social cost after
    ``burn_in`` rounds (default: half the horizon); the stable signal by its
    final round. The no-signal cost uses an uninformative signal scale.
    """
    h0 = no_signal_flow(game, beliefs, Sigma_stable, config)
    _, _, sc0 = realize_flow(game, h0)
    tu = play_repeated(game, beliefs, Sigma_unstable, init_mu_s, config)
    ts = play_repeated(game, beliefs, Sigma_stable, init_mu_s, config)
    burn = len(tu) // 2 if burn_in is None else burn_in
    wardrop = wardrop_baseline(game)
    return EfficiencyComparison(
        sc0, float(np.mean(tu.social_costs[burn:])), float(ts.social_costs[-1]),
        wardrop.social_cost, tu.classification, ts.classification)


def run_seed(master_seed, index):
    """Independent per-run seed derived from (master seed, run index)."""
    return int(np.random.SeedSequence([master_seed, index]).generate_state(1)[0])


def with_seed(config, seed):
    return replace(config, seed=seed)
