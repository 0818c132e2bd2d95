"""Random test networks at the scale of a small urban road graph, with beliefs.

The generator lays nodes on a jittered grid, keeps a random spanning tree of
the grid (plus diagonal) links and adds links until the requested edge
count is reached; every link becomes two opposed directed edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import Disconnected, InfeasibleTopology
from .game import GameDefinition, ODPair, enumerate_routes
from .gaussian import symmetrize
from .prediction import BeliefParams
from .simulator import best_response_dynamics


@dataclass(frozen=True)
class NetworkSpec:
    num_nodes: int = 16
    num_edges: int = 46
    num_pairs: int = 14
    num_agents: int = 172
    routes_per_pair: int = 5
    slope_range: tuple = (2.0, 3.0)
    offset_range: tuple = (0.0, 1.0)
    covariance_samples: int = 100
    stop_fraction: float = 0.3
    seed: int = 0


@dataclass(frozen=True)
class GeneratedInstance:
    game: GameDefinition
    beliefs: BeliefParams
    Sigma_s: np.ndarray
    positions: np.ndarray
    metadata: dict


def _candidate_links(rows, cols):
    links = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                links.append((v, v + 1))
            if r + 1 < rows:
                links.append((v, v + cols))
            if r + 1 < rows and c + 1 < cols:
                links.append((v, v + cols + 1))
            if r + 1 < rows and c > 0:
                links.append((v, v + cols - 1))
    return links


def _random_spanning_tree(n, links, rng):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    tree = []
    for i in rng.permutation(len(links)):
        a, b = links[i]
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
            tree.append(links[i])
    return tree


def generate_topology(num_nodes, num_edges, rng):
    """Bidirected connected graph; returns (edges, positions)."""
    if num_edges % 2:
        raise InfeasibleTopology("a bidirected graph needs an even number of edges")
    n_links = num_edges // 2
    cols = math.ceil(math.sqrt(num_nodes))
    rows = math.ceil(num_nodes / cols)
    links = [(a, b) for a, b in _candidate_links(rows, cols) if a < num_nodes and b < num_nodes]
    if n_links < num_nodes - 1:
        raise InfeasibleTopology(f"{num_edges} edges cannot connect {num_nodes} nodes")
    if n_links > len(links):
        raise InfeasibleTopology(f"at most {2 * len(links)} edges fit on {num_nodes} grid nodes")
    # prefer axis-aligned links: diagonals only when the grid runs out
    axis = [l for l in links if abs(l[0] - l[1]) in (1, cols)]
    tree = _random_spanning_tree(num_nodes, axis, rng)
    if len(tree) < num_nodes - 1:
        tree = _random_spanning_tree(num_nodes, links, rng)
    chosen = set(tree)
    spare_axis = [l for l in axis if l not in chosen]
    spare_diag = [l for l in links if l not in chosen and l not in axis]
    for pool in (spare_axis, spare_diag):
        for i in rng.permutation(len(pool)):
            if len(chosen) >= n_links:
                break
            chosen.add(pool[i])
    links = sorted(chosen)
    edges = []
    for a, b in links:
        edges += [(a, b), (b, a)]
    grid = np.array([(v % cols, v // cols) for v in range(num_nodes)], dtype=float)
    positions = grid + rng.uniform(-0.2, 0.2, size=grid.shape)
    return edges, positions


def random_choice_covariance(game, samples, rng):
    """Sample covariance of edge flows when every agent picks a uniform random route."""
    flows = np.empty((samples, game.m))
    for s in range(samples):
        h = np.zeros(game.M)
        for k, sl in enumerate(game.pair_slices):
            n_routes = sl.stop - sl.start
            h[sl] = rng.multinomial(game.od_pairs[k].demand, np.full(n_routes, 1.0 / n_routes))
        flows[s] = game.incidence_D @ h
    return symmetrize(np.cov(flows, rowvar=False))


def truncated_best_response_flow(game, rng, stop_fraction):
    """Edge flow of full-information best-response play halted early.

    Starting from a random profile, the dynamics are run to equilibrium
    once to count the moves needed, then replayed from the same start and
    stopped after ``stop_fraction`` of those moves.
    """
    pairs = game.agent_pairs()
    start = np.array([sl.start + rng.integers(sl.stop - sl.start)
                      for sl in (game.pair_slices[k] for k in pairs)])
    _, total, _, _ = best_response_dynamics(game, start.copy())
    cap = max(1, int(math.ceil(stop_fraction * total))) if total else 0
    if cap:
        choices, _, _, _ = best_response_dynamics(game, start.copy(), max_moves=cap)
    else:
        choices = start
    h = np.bincount(choices, minlength=game.M).astype(float)
    return game.incidence_D @ h, total, cap


def generate_network(spec=NetworkSpec()):
    """Game, beliefs and a base signal covariance from one seed.

    Sigma_h and the base Sigma_s are independent random-route-choice
    covariances; Sigma_0 = Sigma_h; mu_h is the truncated best-response flow.
    """
    rng = np.random.default_rng(spec.seed)
    for _ in range(100):
        edges, positions = generate_topology(spec.num_nodes, spec.num_edges, rng)
        pairs = _draw_pairs(spec, edges, rng)
        if pairs is not None:
            break
    else:
        raise InfeasibleTopology(
            f"could not place {spec.num_pairs} OD pairs with {spec.routes_per_pair} routes each")
    m = len(edges)
    slopes = rng.uniform(*spec.slope_range, size=m)
    offsets = rng.uniform(*spec.offset_range, size=m)
    game = GameDefinition.build(spec.num_nodes, edges, pairs, slopes, offsets)
    Sigma_h = random_choice_covariance(game, spec.covariance_samples, rng)
    Sigma_s = random_choice_covariance(game, spec.covariance_samples, rng)
    mu_h, total_moves, cap = truncated_best_response_flow(game, rng, spec.stop_fraction)
    beliefs = BeliefParams(mu_h, Sigma_h, Sigma_h)
    meta = {"seed": spec.seed, "num_nodes": spec.num_nodes, "num_edges": m,
            "num_pairs": spec.num_pairs, "num_agents": spec.num_agents,
            "routes_per_pair": spec.routes_per_pair,
            "covariance_samples": spec.covariance_samples,
            "stop_fraction": spec.stop_fraction,
            "best_response_moves_to_equilibrium": total_moves,
            "best_response_moves_used": cap}
    return GeneratedInstance(game, beliefs, Sigma_s, positions, meta)


def _draw_pairs(spec, edges, rng):
    n = spec.num_nodes
    candidates = [(o, d) for o in range(n) for d in range(n) if o != d]
    order = rng.permutation(len(candidates))
    chosen = []
    for i in order:
        o, d = candidates[i]
        try:
            routes = enumerate_routes(n, edges, o, d, spec.routes_per_pair)
        except Disconnected:
            continue
        if len(routes) == spec.routes_per_pair:
            chosen.append((o, d))
        if len(chosen) == spec.num_pairs:
            break
    if len(chosen) < spec.num_pairs or spec.num_agents < spec.num_pairs:
        return None
    demand = rng.multinomial(spec.num_agents - spec.num_pairs,
                             np.full(spec.num_pairs, 1.0 / spec.num_pairs)) + 1
    return [ODPair(o, d, int(q), spec.routes_per_pair) for (o, d), q in zip(chosen, demand)]
