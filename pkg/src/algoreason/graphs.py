"""Problem instances: symmetric weighted graphs and their generators.

Two instance families are supported: complete graphs from points in the unit
square (weights = Euclidean distances) and connected Erdős–Rényi graphs with
uniform edge weights. Graphs serialize to one JSON object per line.
"""

import heapq
from dataclasses import dataclass, field

import numpy as np

from .rng import Rng
from .serialize import dumps, loads

POSITION_WEIGHT_TOL = 1e-12


class GenerationError(RuntimeError):
    """Rejection sampling failed to produce a valid instance."""


@dataclass
class WeightedGraph:
    """Undirected weighted graph on nodes 0..n-1.

    ``weights`` is a symmetric n×n float64 matrix with zero diagonal,
    ``adj`` the matching boolean edge mask. ``positions`` (n×2, unit square)
    is set only for Euclidean instances, in which case the graph is complete
    and weights equal pairwise Euclidean distances.
    """

    n: int
    weights: np.ndarray
    adj: np.ndarray
    positions: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.adj = np.asarray(self.adj, dtype=bool)
        if self.positions is not None:
            self.positions = np.asarray(self.positions, dtype=np.float64)
        self.validate()

    def validate(self) -> None:
        n = self.n
        if self.weights.shape != (n, n) or self.adj.shape != (n, n):
            raise ValueError("weights/adj must be n×n")
        if not np.array_equal(self.weights, self.weights.T):
            raise ValueError("weights must be symmetric")
        if np.any(np.diag(self.weights) != 0.0):
            raise ValueError("diagonal weights must be zero")
        if not np.array_equal(self.adj, self.adj.T) or np.any(np.diag(self.adj)):
            raise ValueError("adj must be symmetric with a false diagonal")
        if np.any(self.weights[self.adj] <= 0.0):
            raise ValueError("present edges must have positive weight")
        if self.positions is not None:
            if self.positions.shape != (n, 2):
                raise ValueError("positions must be n×2")
            off_diag = ~np.eye(n, dtype=bool)
            if not np.all(self.adj == off_diag):
                raise ValueError("positioned graphs must be complete")
            dists = pairwise_distances(self.positions)
            if np.max(np.abs(dists - self.weights)) > POSITION_WEIGHT_TOL:
                raise ValueError("weights do not match position distances")

    def num_edges(self) -> int:
        return int(np.count_nonzero(self.adj)) // 2

    def edge_list(self) -> list[tuple[int, int, float]]:
        ii, jj = np.nonzero(np.triu(self.adj, k=1))
        return [(int(i), int(j), float(self.weights[i, j])) for i, j in zip(ii, jj)]


def pairwise_distances(positions: np.ndarray) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    d = np.sqrt(np.sum(diff * diff, axis=2))
    np.fill_diagonal(d, 0.0)
    return d


def euclidean_from_positions(positions: np.ndarray) -> WeightedGraph:
    """Complete graph whose weights are the pairwise distances of ``positions``."""
    positions = np.asarray(positions, dtype=np.float64)
    n = positions.shape[0]
    if n < 2:
        raise ValueError("need at least 2 points")
    adj = ~np.eye(n, dtype=bool)
    return WeightedGraph(n, pairwise_distances(positions), adj, positions)


def gen_euclidean_complete(n: int, rng: Rng) -> WeightedGraph:
    """Complete graph on n i.i.d. uniform points in the unit square."""
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    while True:
        positions = rng.uniform(0.0, 1.0, (n, 2))
        d = pairwise_distances(positions)
        # duplicate points would create zero-weight edges; resample (measure zero)
        if np.min(d[~np.eye(n, dtype=bool)]) > 0.0:
            return WeightedGraph(n, d, ~np.eye(n, dtype=bool), positions)


MAX_REJECTIONS = 10_000


def gen_er_connected(n: int, p: float, rng: Rng) -> WeightedGraph:
    """Connected Erdős–Rényi graph; edge weights i.i.d. uniform on (0, 1].

    Rejection-samples until connected, preserving the G(n, p) distribution
    conditioned on connectivity.
    """
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1], got {p}")
    for _ in range(MAX_REJECTIONS):
        upper = np.triu(rng.uniform(0.0, 1.0, (n, n)) < p, k=1)
        adj = upper | upper.T
        w_upper = np.triu(1.0 - rng.uniform(0.0, 1.0, (n, n)), k=1)
        weights = np.where(adj, w_upper + w_upper.T, 0.0)
        g = WeightedGraph(n, weights, adj)
        if is_connected(g):
            return g
    raise GenerationError(f"no connected G({n}, {p}) graph in {MAX_REJECTIONS} draws")


def is_connected(g: WeightedGraph) -> bool:
    """True iff the graph has a single connected component."""
    if g.n < 1:
        raise ValueError("graph must have at least one node")
    seen = np.zeros(g.n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in np.nonzero(g.adj[u])[0]:
            if not seen[v]:
                seen[v] = True
                stack.append(int(v))
    return bool(seen.all())


def apsp_matrix(g: WeightedGraph) -> np.ndarray:
    """All-pairs shortest path distances via one Dijkstra run per source.

    Row s accumulates edge-by-edge outward from s, i.e. row s equals the
    minimum over paths of their front-to-back float sums. Rows for opposite
    directions can therefore disagree in the last ulp; the matrix is
    symmetric to ~1e-12, not bitwise.
    """
    if not is_connected(g):
        raise ValueError("apsp_matrix requires a connected graph")
    n = g.n
    neighbors = [np.nonzero(g.adj[u])[0] for u in range(n)]
    out = np.zeros((n, n), dtype=np.float64)
    for s in range(n):
        dist = np.full(n, np.inf)
        dist[s] = 0.0
        done = np.zeros(n, dtype=bool)
        heap = [(0.0, s)]
        while heap:
            d_u, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for v in neighbors[u]:
                cand = d_u + g.weights[u, v]
                if cand < dist[v]:
                    dist[v] = cand
                    heapq.heappush(heap, (cand, int(v)))
        out[s] = dist
    return out


def graph_to_json(g: WeightedGraph) -> str:
    obj = {"n": g.n, "edges": [[i, j, w] for i, j, w in g.edge_list()]}
    if g.positions is not None:
        obj["positions"] = [[float(x), float(y)] for x, y in g.positions]
    return dumps(obj)


def graph_from_json(line: str) -> WeightedGraph:
    obj = loads(line)
    n = obj["n"]
    weights = np.zeros((n, n), dtype=np.float64)
    adj = np.zeros((n, n), dtype=bool)
    for i, j, w in obj["edges"]:
        weights[i, j] = weights[j, i] = w
        adj[i, j] = adj[j, i] = True
    positions = None
    if "positions" in obj:
        positions = np.asarray(obj["positions"], dtype=np.float64)
    return WeightedGraph(n, weights, adj, positions)


def save_graphs(path, graphs) -> None:
    with open(path, "w") as f:
        for g in graphs:
            f.write(graph_to_json(g) + "\n")


def load_graphs(path) -> list[WeightedGraph]:
    with open(path) as f:
        return [graph_from_json(line) for line in f if line.strip()]
