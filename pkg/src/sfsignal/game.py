"""Atomic, singleton, unweighted network congestion games with affine costs.

All flow and cost vectors are column vectors: ``f = D h``, ``c = Lambda f + b``
and route costs ``phi = D^T c``.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, Disconnected, GameFileError

log = logging.getLogger(__name__)


def enumerate_routes(num_nodes, edges, origin, destination, count):
    """Up to ``count`` loopless paths of fewest hops from origin to destination.

    Paths are edge-index tuples ordered by (hop count, lexicographic edge
    indices). Parallel edges yield distinct paths. Fewer than ``count`` paths
    are returned when the graph has fewer simple paths.

    Raises:
        Disconnected: destination is unreachable from origin.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if origin == destination:
        raise ValueError("origin and destination must differ")
    out_edges = [[] for _ in range(num_nodes)]
    in_edges = [[] for _ in range(num_nodes)]
    for idx, (tail, head) in enumerate(edges):
        out_edges[tail].append(idx)
        in_edges[head].append(idx)

    # hop distance to destination, for pruning
    dist = [None] * num_nodes
    dist[destination] = 0
    queue = deque([destination])
    while queue:
        v = queue.popleft()
        for idx in in_edges[v]:
            u = edges[idx][0]
            if dist[u] is None:
                dist[u] = dist[v] + 1
                queue.append(u)
    if dist[origin] is None:
        raise Disconnected(f"node {destination} is unreachable from node {origin}")

    routes = []
    length = dist[origin]
    while len(routes) < count and length < num_nodes:
        found = []
        _extend(origin, destination, length, [], {origin}, out_edges, edges, dist, found)
        found.sort()
        routes.extend(found[:count - len(routes)])
        length += 1
    return routes


def _extend(node, dest, budget, path, visited, out_edges, edges, dist, found):
    if node == dest:
        if budget == 0:
            found.append(tuple(path))
        return
    for idx in out_edges[node]:
        nxt = edges[idx][1]
        if nxt in visited or dist[nxt] is None or dist[nxt] > budget - 1:
            continue
        visited.add(nxt)
        path.append(idx)
        _extend(nxt, dest, budget - 1, path, visited, out_edges, edges, dist, found)
        path.pop()
        visited.discard(nxt)


@dataclass(frozen=True)
class FlowVector:
    """Route flows h and the edge flows f = D h they induce."""

    route_flow_h: np.ndarray
    edge_flow_f: np.ndarray

    @classmethod
    def from_route_flow(cls, game, h):
        h = np.asarray(h, dtype=float)
        return cls(h, edge_flow(game, h))


@dataclass(frozen=True)
class ODPair:
    origin: int
    destination: int
    demand: int
    num_routes: int = 1


@dataclass(frozen=True)
class GameDefinition:
    """Network congestion game: directed multigraph, OD demands, routes, affine costs.

    ``routes[k]`` lists the routes of pair ``k`` as edge-index tuples; the
    global route index runs over pairs in order. ``incidence_D`` is the m x M
    edge-route incidence matrix.
    """

    num_nodes: int
    edges: tuple
    od_pairs: tuple
    routes: tuple
    cost_slope_Lambda: np.ndarray
    cost_offset_b: np.ndarray
    incidence_D: np.ndarray = field(init=False)
    route_pair: np.ndarray = field(init=False)
    pair_slices: tuple = field(init=False)

    def __post_init__(self):
        edges = tuple((int(t), int(h)) for t, h in self.edges)
        pairs = tuple(self.od_pairs)
        routes = tuple(tuple(tuple(int(e) for e in r) for r in rk) for rk in self.routes)
        m = len(edges)
        Lam = np.asarray(self.cost_slope_Lambda, dtype=float)
        if Lam.ndim == 1:
            Lam = np.diag(Lam)
        b = np.asarray(self.cost_offset_b, dtype=float).reshape(-1)
        if Lam.shape != (m, m) or b.size != m:
            raise DimensionMismatch(
                f"{m} edges but Lambda {Lam.shape} and b {b.shape}")
        if len(routes) != len(pairs):
            raise ValueError("need one route list per OD pair")
        for t, h in edges:
            if not (0 <= t < self.num_nodes and 0 <= h < self.num_nodes):
                raise ValueError(f"edge ({t}, {h}) references a missing node")
        cols, owner, slices = [], [], []
        for k, (pair, rk) in enumerate(zip(pairs, routes)):
            if not rk:
                raise ValueError(f"OD pair {k} has no routes")
            if pair.demand < 1:
                raise ValueError(f"OD pair {k} has non-positive demand")
            start = len(cols)
            for r in rk:
                _check_path(edges, r, pair.origin, pair.destination, k)
                col = np.zeros(m)
                col[list(r)] = 1.0
                cols.append(col)
                owner.append(k)
            slices.append(slice(start, len(cols)))
        D = np.column_stack(cols)
        if np.any(np.diag(Lam) < 0):
            log.warning("cost slope has negative diagonal entries")
        for name, val in [("edges", edges), ("od_pairs", pairs), ("routes", routes),
                          ("cost_slope_Lambda", Lam), ("cost_offset_b", b),
                          ("incidence_D", D), ("route_pair", np.array(owner)),
                          ("pair_slices", tuple(slices))]:
            if isinstance(val, np.ndarray):
                val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def m(self):
        return len(self.edges)

    @property
    def M(self):
        return self.incidence_D.shape[1]

    @property
    def demands(self):
        return np.array([p.demand for p in self.od_pairs], dtype=int)

    @property
    def num_agents(self):
        return int(self.demands.sum())

    @classmethod
    def build(cls, num_nodes, edges, od_pairs, cost_slope, cost_offset, routes=None):
        """Construct a game, enumerating hop-shortest routes where not given."""
        edges = [tuple(e) for e in edges]
        if routes is None:
            routes = [None] * len(od_pairs)
        routes = [
            rk if rk is not None else enumerate_routes(
                num_nodes, edges, p.origin, p.destination, p.num_routes)
            for p, rk in zip(od_pairs, routes)
        ]
        return cls(num_nodes, edges, od_pairs, routes, cost_slope, cost_offset)

    def agent_pairs(self):
        """OD pair index of every agent, agents numbered pair by pair."""
        return np.repeat(np.arange(len(self.od_pairs)), self.demands)


def _check_path(edges, route, origin, destination, k):
    node = origin
    seen = {origin}
    for e in route:
        if not 0 <= e < len(edges) or edges[e][0] != node:
            raise ValueError(f"route {route} of pair {k} is not a connected path")
        node = edges[e][1]
        if node in seen:
            raise ValueError(f"route {route} of pair {k} revisits node {node}")
        seen.add(node)
    if node != destination:
        raise ValueError(f"route {route} of pair {k} does not reach node {destination}")


def _vec(x, n, what):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != n:
        raise DimensionMismatch(f"{what} must have length {n}, got {x.shape}")
    return x


def edge_flow(game, h):
    """f = D h (route flows to edge flows)."""
    return _vec(h, game.M, "route flow") @ game.incidence_D.T


def edge_costs(game, f):
    """c = Lambda f + b."""
    return _vec(f, game.m, "edge flow") @ game.cost_slope_Lambda.T + game.cost_offset_b


def route_costs(game, c):
    """phi = D^T c, i.e. the sum of edge costs along each route."""
    return _vec(c, game.m, "edge cost") @ game.incidence_D


def social_cost(game, phi, h):
    phi = _vec(phi, game.M, "route cost")
    h = _vec(h, game.M, "route flow")
    return float(np.dot(phi, h))


def route_flow_from_choices(game, choices):
    """h_r = number of agents whose chosen (global) route index is r."""
    choices = np.asarray(choices, dtype=int)
    return np.bincount(choices, minlength=game.M).astype(float)


def choice_matrix(game, choices):
    """Kronecker-delta route choice matrix X with X[i, r] = 1 iff agent i uses r."""
    choices = np.asarray(choices, dtype=int)
    X = np.zeros((choices.size, game.M))
    X[np.arange(choices.size), choices] = 1.0
    return X


# ---------------------------------------------------------------------------
# game file format
# ---------------------------------------------------------------------------

GAME_FORMAT_HEADER = "# sfsignal game v1"


def format_game(game):
    """Serialize a game to the sectioned text format (see README)."""
    lines = [GAME_FORMAT_HEADER, f"nodes {game.num_nodes}", "", "[edges]",
             "# tail head"]
    lines += [f"{t} {h}" for t, h in game.edges]
    Lam = game.cost_slope_Lambda
    if np.count_nonzero(Lam - np.diag(np.diag(Lam))) == 0:
        lines += ["", "[costs]", "# slope offset (one line per edge)"]
        lines += [f"{float(Lam[i, i])!r} {float(game.cost_offset_b[i])!r}" for i in range(game.m)]
    else:
        lines += ["", "[cost_matrix]"]
        lines += [" ".join(repr(float(x)) for x in row) for row in Lam]
        lines += ["", "[cost_offset]"]
        lines += [repr(float(x)) for x in game.cost_offset_b]
    lines += ["", "[od]", "# origin destination demand num_routes"]
    lines += [f"{p.origin} {p.destination} {p.demand} {p.num_routes}" for p in game.od_pairs]
    lines += ["", "[routes]", "# pair: edge indices"]
    for k, rk in enumerate(game.routes):
        lines += [f"{k}: " + " ".join(str(e) for e in r) for r in rk]
    return "\n".join(lines) + "\n"


def write_game(game, path):
    with open(path, "w") as fh:
        fh.write(format_game(game))


def _sections(text, path):
    """Yield (section, lineno, tokens) for non-blank, non-comment lines."""
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            yield section, lineno, None
            continue
        yield section, lineno, line


def parse_game(text, path=None):
    """Parse the sectioned text format; errors carry the offending line number."""
    num_nodes = None
    edges, slopes, offsets, matrix, offset_vec, pairs = [], [], [], [], [], []
    routes = {}
    known = {None, "edges", "costs", "cost_matrix", "cost_offset", "od", "routes"}
    for section, lineno, line in _sections(text, path):
        if section not in known:
            raise GameFileError(f"unknown section [{section}]", path, lineno)
        if line is None:
            continue
        try:
            if section is None:
                key, val = line.split()
                if key != "nodes":
                    raise ValueError(f"unexpected header entry {key!r}")
                num_nodes = int(val)
            elif section == "edges":
                t, h = line.split()
                edges.append((int(t), int(h)))
            elif section == "costs":
                s, o = line.split()
                slopes.append(float(s))
                offsets.append(float(o))
            elif section == "cost_matrix":
                matrix.append([float(x) for x in line.split()])
            elif section == "cost_offset":
                offset_vec.extend(float(x) for x in line.split())
            elif section == "od":
                tok = [int(x) for x in line.split()]
                if len(tok) not in (3, 4):
                    raise ValueError("expected 'origin destination demand [num_routes]'")
                pairs.append(ODPair(*tok))
            elif section == "routes":
                head, _, rest = line.partition(":")
                if not _:
                    raise ValueError("expected 'pair: edge indices'")
                routes.setdefault(int(head), []).append(tuple(int(x) for x in rest.split()))
        except ValueError as exc:
            raise GameFileError(str(exc), path, lineno) from None

    if not edges:
        raise GameFileError("no [edges] section", path)
    if num_nodes is None:
        num_nodes = 1 + max(max(e) for e in edges)
    m = len(edges)
    if matrix:
        Lam = np.array(matrix)
        b = np.array(offset_vec)
    else:
        Lam = np.array(slopes)
        b = np.array(offsets)
    if Lam.shape[0] != m or b.size != m:
        raise GameFileError(f"cost parameters cover {Lam.shape[0]} edges, expected {m}", path)
    if not pairs:
        raise GameFileError("no [od] section", path)
    route_lists = [routes.get(k) for k in range(len(pairs))]
    try:
        return GameDefinition.build(num_nodes, edges, pairs, Lam, b, route_lists)
    except (ValueError, Disconnected) as exc:
        raise GameFileError(str(exc), path) from None


def read_game(path):
    with open(path) as fh:
        return parse_game(fh.read(), path=str(path))
