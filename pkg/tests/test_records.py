import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sfsignal.errors import GameFileError
from sfsignal.minority import TABLE1, mg_as_game, mg_signal_cov, to_flow
from sfsignal.network import NetworkSpec, generate_network
from sfsignal.records import (format_beliefs, format_report, format_trajectory_csv,
                              parse_beliefs, parse_report, parse_trajectory_csv,
                              trajectory_columns)
from sfsignal.simulator import SimConfig, play_repeated


def test_belief_round_trip_exact():
    inst = generate_network(NetworkSpec(seed=1, num_nodes=9, num_edges=24, num_pairs=4,
                                        num_agents=40, routes_per_pair=3))
    text = format_beliefs(inst.beliefs, inst.Sigma_s, {"seed": 1})
    b, S = parse_beliefs(text)
    np.testing.assert_array_equal(b.mu_h, inst.beliefs.mu_h)
    np.testing.assert_array_equal(b.Sigma_h, inst.beliefs.Sigma_h)
    np.testing.assert_array_equal(S, inst.Sigma_s)
    assert format_beliefs(b, S, {"seed": 1}) == text


def test_belief_defaults_and_errors():
    b, S = parse_beliefs("[mu_h]\n1 2\n[Sigma_h]\n1 0\n0 1\n")
    np.testing.assert_array_equal(b.Sigma_0, b.Sigma_h)
    assert S is None
    with pytest.raises(GameFileError, match="line 2"):
        parse_beliefs("[mu_h]\n1 x\n")
    with pytest.raises(GameFileError):
        parse_beliefs("[mu_h]\n1 2\n")


def test_trajectory_csv_round_trip_exact():
    p = TABLE1.with_sigma_s(0.13)
    game, beliefs = mg_as_game(p)
    traj = play_repeated(game, beliefs, mg_signal_cov(p), to_flow(p, 0.3), SimConfig(num_iterations_tau=12))
    meta, cols = parse_trajectory_csv(format_trajectory_csv(traj, {"seed": 0}))
    assert meta["csv_version"] == "1" and meta["classification"] == traj.classification
    assert list(cols) == trajectory_columns(2, 2)
    np.testing.assert_array_equal(cols["social_cost"], traj.social_costs)
    np.testing.assert_array_equal(cols["f_0"], traj.edge_flows[:, 0])
    np.testing.assert_array_equal(cols["mu_s_1"], traj.signal_means[:, 1])
    np.testing.assert_array_equal(cols["iteration"], np.arange(1, 13))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=5))
def test_report_floats_round_trip(xs):
    rep = parse_report(format_report({"x": np.array(xs), "y": xs[0], "flag": True}))
    assert [float(v) for v in rep["x"].split()] == xs
    assert float(rep["y"]) == xs[0] and rep["flag"] == "True"


def test_report_complex_values():
    rep = parse_report(format_report({"eig": np.array([1 + 2j, -0.5 + 0j])}))
    assert [complex(v) for v in rep["eig"].split()] == [1 + 2j, -0.5 + 0j]
