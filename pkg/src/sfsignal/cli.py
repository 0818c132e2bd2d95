"""Command-line front end.

Subcommands: design, simulate, baseline, generate-network, sweep. Every
command writes its outputs under ``--out`` together with the seed and
settings needed to reproduce it.

Exit codes: 0 success (for ``design``: stable fixed point), 2 unstable
fixed point, 1 any error.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .designer import find_fixed_point, SelfMap, stability
from .errors import SignalDesignError
from .experiments import efficiency_comparison, run_seed
from .game import read_game, write_game
from .minority import MgParams, mg_as_game, mg_signal_cov, to_flow
from .network import NetworkSpec, generate_network
from .prediction import SPREADS
from .records import (format_report, format_trajectory_csv, read_beliefs,
                      write_beliefs)
from .simulator import SimConfig, play_repeated, wardrop_baseline

log = logging.getLogger("sfsignal")

SEED_ENV = "SFSIGNAL_SEED"
EXIT_OK, EXIT_ERROR, EXIT_UNSTABLE = 0, 1, 2


class CliError(Exception):
    pass


def _default_seed():
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise CliError(f"{SEED_ENV}={raw!r} is not an integer") from None


def _load_problem(args):
    """Returns (game, beliefs, Sigma_s, default init, metadata)."""
    if args.minority:
        params = MgParams(mu_h=args.mu_h, sigma_h=args.sigma_h, sigma_0=args.sigma_0,
                          sigma_s=args.sigma_s if args.sigma_s is not None else 0.22,
                          n=args.agents)
        game, beliefs = mg_as_game(params)
        meta = {"problem": "minority", "mu_h": params.mu_h, "sigma_h": params.sigma_h,
                "sigma_0": params.sigma_0, "sigma_s": params.sigma_s, "n": params.n}
        return game, beliefs, mg_signal_cov(params), to_flow(params, params.mu_h), meta
    if not args.game or not args.beliefs:
        raise CliError("--game and --beliefs are required (or use --minority)")
    for p in (args.game, args.beliefs):
        if not Path(p).is_file():
            raise CliError(f"no such file: {p}")
    game = read_game(args.game)
    beliefs, base = read_beliefs(args.beliefs)
    if beliefs.m != game.m:
        raise CliError(f"beliefs have dimension {beliefs.m} but the game has {game.m} edges")
    if base is None:
        raise CliError(f"{args.beliefs} has no [Sigma_s] section")
    scale = 1.0 if args.sigma_s is None else args.sigma_s
    if scale <= 0:
        raise CliError("--sigma-s must be positive")
    meta = {"problem": "network", "game": args.game, "beliefs": args.beliefs,
            "sigma_s_scale": scale}
    return game, beliefs, scale * base, beliefs.mu_h, meta


def _init_mu(args, game, default):
    if args.mu_s_init is None:
        return default
    vals = [float(x) for x in args.mu_s_init.split(",")]
    if len(vals) == 1 and args.minority:
        return to_flow(MgParams(n=args.agents), vals[0])
    if len(vals) != game.m:
        raise CliError(f"--mu-s-init needs 1 (minority) or {game.m} comma-separated values")
    return np.array(vals)


def _out_dir(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _config(args, seed=None):
    return SimConfig(seed=args.seed if seed is None else seed, num_iterations_tau=args.tau,
                     mode=args.mode, signal_mode=args.signal_mode, spread=args.spread)


def cmd_design(args):
    game, beliefs, Sigma_s, init, meta = _load_problem(args)
    init = _init_mu(args, game, init)
    gmap = SelfMap(game, beliefs, Sigma_s, spread=args.spread)
    tol = args.tol if args.tol is not None else 1e-6 * game.num_agents
    fp = find_fixed_point(game, beliefs, Sigma_s, init, tol=tol, gmap=gmap,
                          raise_on_failure=False)
    rep = stability(game, beliefs, Sigma_s, fp.mu_s0, gmap=gmap)
    out = _out_dir(args)
    report = dict(meta)
    report.update({
        "version": __version__, "seed": args.seed, "spread": args.spread, "tol": tol,
        "mu_s0": fp.mu_s0, "mu_s0_normalized": fp.mu_s0 / game.num_agents,
        "residual": fp.residual, "iterations": fp.iterations, "converged": fp.converged,
        "spectral_radius": rep.spectral_radius, "eigenvalues": rep.eigenvalues,
        "stable": rep.stable, "marginal": rep.marginal,
    })
    (out / "design.txt").write_text(format_report(report))
    if game.m <= 4:
        print(f"mu_s0 = {np.array2string(fp.mu_s0 / game.num_agents, precision=4)} (normalized)")
    print(f"fixed point written to {out / 'design.txt'} after {fp.iterations} iterations")
    print(f"residual {fp.residual:.3g}, spectral radius {rep.spectral_radius:.4f}, "
          f"{'stable' if rep.stable else 'unstable'}")
    if not fp.converged:
        raise CliError(f"fixed point not found (best residual {fp.residual:.3g})")
    return EXIT_OK if rep.stable else EXIT_UNSTABLE


def cmd_simulate(args):
    if args.tau < 1:
        raise CliError("--tau must be at least 1")
    game, beliefs, Sigma_s, init, meta = _load_problem(args)
    init = _init_mu(args, game, init)
    config = _config(args)
    traj = play_repeated(game, beliefs, Sigma_s, init, config)
    out = _out_dir(args)
    meta.update({"seed": args.seed, "tau": args.tau, "mode": args.mode,
                 "signal_mode": args.signal_mode, "spread": args.spread})
    (out / "trajectory.csv").write_text(format_trajectory_csv(traj, meta))
    print(f"{len(traj)} iterations, classification: {traj.classification}")
    costs = None
    if args.compare_scale:
        cmp_ = efficiency_comparison(game, beliefs, Sigma_s, args.compare_scale * Sigma_s,
                                     init, config)
        costs = cmp_.as_dict()
        lines = ["label,social_cost"] + [f"{k},{v!r}" for k, v in costs.items()]
        (out / "social_costs.csv").write_text("\n".join(lines) + "\n")
        for k, v in costs.items():
            print(f"  {k:>16}: {v:.6g}")
    if args.plots:
        from .plotting import plot_first_component, plot_social_costs, plot_trajectory

        comps = [0] if args.minority else None
        plot_trajectory(traj, out / "trajectory.png", components=comps,
                        title=f"{meta.get('problem')} signal dynamics")
        if game.m > 2 and len(traj) > 1:
            plot_first_component(traj, out / "first_component.png")
        if costs:
            plot_social_costs(costs, out / "social_costs.png")
    return EXIT_OK


def cmd_baseline(args):
    if args.minority:
        game, *_ = _load_problem(args)
    else:
        if not args.game:
            raise CliError("--game is required (or use --minority)")
        game = read_game(args.game)
    res = wardrop_baseline(game, max_rounds=args.max_rounds)
    out = _out_dir(args)
    (out / "baseline.txt").write_text(format_report({
        "social_cost": res.social_cost, "moves": res.moves,
        "route_flow": res.flow.route_flow_h, "edge_flow": res.flow.edge_flow_f}))
    print(f"equilibrium social cost {res.social_cost:.6g} after {res.moves} moves")
    return EXIT_OK


def cmd_generate_network(args):
    spec = NetworkSpec(num_nodes=args.nodes, num_edges=args.edges, num_pairs=args.pairs,
                       num_agents=args.agents_total, routes_per_pair=args.routes,
                       stop_fraction=args.stop_fraction, seed=args.seed)
    inst = generate_network(spec)
    out = _out_dir(args)
    write_game(inst.game, out / "game.txt")
    write_beliefs(out / "beliefs.txt", inst.beliefs, inst.Sigma_s, inst.metadata)
    print(f"wrote {out / 'game.txt'} and {out / 'beliefs.txt'} "
          f"(m={inst.game.m}, n={inst.game.num_agents}, |K|={len(inst.game.od_pairs)})")
    return EXIT_OK


def _sweep_point(job):
    args, scale, seed = job
    game, beliefs, Sigma_s, init, _ = _load_problem(args)
    init = _init_mu(args, game, init)
    S = scale * Sigma_s
    gmap = SelfMap(game, beliefs, S, spread=args.spread)
    fp = find_fixed_point(game, beliefs, S, init, gmap=gmap, raise_on_failure=False)
    rep = stability(game, beliefs, S, fp.mu_s0, gmap=gmap)
    traj = play_repeated(game, beliefs, S, init, _config(args, seed))
    return (scale, seed, fp.residual, fp.converged, rep.spectral_radius, rep.stable,
            traj.classification, float(np.mean(traj.social_costs[len(traj) // 2:])))


def cmd_sweep(args):
    scales = [float(x) for x in args.scales.split(",")]
    if not scales or min(scales) <= 0:
        raise CliError("--scales must be positive comma-separated numbers")
    jobs = [(args, s, run_seed(args.seed, i)) for i, s in enumerate(scales)]
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(_sweep_point, jobs))
    else:
        rows = [_sweep_point(j) for j in jobs]
    out = _out_dir(args)
    header = ("scale,run_seed,residual,converged,spectral_radius,stable,"
              "classification,mean_social_cost")
    lines = [f"# master_seed: {args.seed}", header]
    lines += [",".join(repr(v) if isinstance(v, float) else str(v) for v in row) for row in rows]
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    for row in rows:
        print(f"scale {row[0]:>8g}: radius {row[4]:.4f} {'stable' if row[5] else 'unstable':>8}, "
              f"dynamics {row[6]}")
    return EXIT_OK


def _add_problem_args(p):
    p.add_argument("--game", help="game definition file")
    p.add_argument("--beliefs", help="belief file (needs a [Sigma_s] section)")
    p.add_argument("--sigma-s", type=float, default=None,
                   help="network: scale of the base signal covariance; "
                        "minority game: signal standard deviation")
    p.add_argument("--mu-s-init", default=None,
                   help="initial signal mean, comma-separated (one value for --minority)")
    p.add_argument("--minority", action="store_true",
                   help="use the built-in two-route minority game")
    p.add_argument("--mu-h", type=float, default=0.3)
    p.add_argument("--sigma-h", type=float, default=0.2)
    p.add_argument("--sigma-0", type=float, default=0.2)
    p.add_argument("--agents", type=int, default=81, help="minority game population")
    p.add_argument("--spread", choices=SPREADS, default="choice",
                   help="aggregate belief spread used for prediction")


def _add_sim_args(p):
    p.add_argument("--tau", type=int, default=50, help="number of repeated rounds")
    p.add_argument("--mode", choices=("expectation", "sampled"), default="expectation")
    p.add_argument("--signal-mode", choices=("per_agent", "shared"), default="per_agent")


def build_parser():
    parser = argparse.ArgumentParser(prog="sfsignal", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None,
                       help=f"random seed (default: ${SEED_ENV} or 0)")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("design", help="solve for a self-fulfilling signal and certify stability")
    _add_problem_args(p)
    p.add_argument("--tol", type=float, default=None)
    common(p)
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("simulate", help="run the repeated signaling game")
    _add_problem_args(p)
    _add_sim_args(p)
    p.add_argument("--compare-scale", type=float, default=None,
                   help="also compare social costs against this multiple of the signal covariance")
    p.add_argument("--plots", action="store_true", help="write PNG figures")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("baseline", help="complete-information equilibrium by best response")
    _add_problem_args(p)
    p.add_argument("--max-rounds", type=int, default=1000)
    common(p)
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("generate-network", help="write a random game and belief file")
    p.add_argument("--nodes", type=int, default=16)
    p.add_argument("--edges", type=int, default=46)
    p.add_argument("--pairs", type=int, default=14)
    p.add_argument("--agents-total", type=int, default=172)
    p.add_argument("--routes", type=int, default=5)
    p.add_argument("--stop-fraction", type=float, default=0.3)
    common(p)
    p.set_defaults(func=cmd_generate_network)

    p = sub.add_parser("sweep", help="stability and dynamics over signal covariance scales")
    _add_problem_args(p)
    _add_sim_args(p)
    p.add_argument("--scales", default="1,2,4,9")
    p.add_argument("--jobs", type=int, default=1)
    common(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is None:
            args.seed = _default_seed()
        return args.func(args)
    except (CliError, SignalDesignError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
