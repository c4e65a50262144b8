import numpy as np
import pytest

from algoreason.graphs import (
    GenerationError,
    WeightedGraph,
    apsp_matrix,
    euclidean_from_positions,
    gen_er_connected,
    gen_euclidean_complete,
    graph_from_json,
    graph_to_json,
    is_connected,
)
from algoreason.rng import Rng


def path_graph(weights):
    """Simple path 0-1-...-k with the given edge weights."""
    n = len(weights) + 1
    w = np.zeros((n, n))
    adj = np.zeros((n, n), dtype=bool)
    for i, wi in enumerate(weights):
        w[i, i + 1] = w[i + 1, i] = wi
        adj[i, i + 1] = adj[i + 1, i] = True
    return WeightedGraph(n, w, adj)


def test_unit_distance_from_injected_positions():
    g = euclidean_from_positions(np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert g.weights[0, 1] == 1.0


def test_euclidean_symmetry_and_zero_diagonal():
    g = gen_euclidean_complete(9, Rng(3))
    assert np.array_equal(g.weights, g.weights.T)
    assert np.all(np.diag(g.weights) == 0.0)
    assert g.adj.sum() == 9 * 8


def test_euclidean_rejects_small_n():
    with pytest.raises(ValueError):
        gen_euclidean_complete(1, Rng(0))


def test_mean_edge_weight_matches_monte_carlo_oracle():
    # oracle: direct Monte-Carlo estimate of E|P-Q| for uniform unit-square points
    oracle_rng = Rng(999)
    p = oracle_rng.uniform(0.0, 1.0, (200_000, 2))
    q = oracle_rng.uniform(0.0, 1.0, (200_000, 2))
    oracle = np.mean(np.sqrt(np.sum((p - q) ** 2, axis=1)))

    rng = Rng(7)
    total, count = 0.0, 0
    while count < 100_000:
        g = gen_euclidean_complete(16, rng)
        iu = np.triu_indices(16, k=1)
        total += g.weights[iu].sum()
        count += len(iu[0])
    assert abs(total / count - oracle) < 0.005


def test_euclidean_triangle_inequality():
    g = gen_euclidean_complete(12, Rng(11))
    w = g.weights
    for k in range(12):
        assert np.all(w <= w[:, k, None] + w[None, k, :] + 1e-12)


def test_er_p1_is_complete():
    g = gen_er_connected(8, 1.0, Rng(5))
    assert g.num_edges() == 8 * 7 // 2


def test_er_always_connected():
    rng = Rng(21)
    for _ in range(100):
        g = gen_er_connected(6, 0.3, rng)
        assert is_connected(g)


def test_er_weights_in_unit_interval():
    g = gen_er_connected(10, 0.5, Rng(2))
    w = g.weights[g.adj]
    assert np.all(w > 0.0) and np.all(w <= 1.0)


def test_er_edge_density_conditional_on_connectivity():
    rng = Rng(13)
    total_edges = 0
    pairs = 12 * 11 // 2
    for _ in range(500):
        total_edges += gen_er_connected(12, 0.5, rng).num_edges()
    density = total_edges / (500 * pairs)
    assert abs(density - 0.5) < 0.03


def test_er_generation_failure_on_tiny_np():
    with pytest.raises(GenerationError):
        gen_er_connected(40, 0.01, Rng(0))


def test_er_rejects_bad_p():
    with pytest.raises(ValueError):
        gen_er_connected(5, 0.0, Rng(0))
    with pytest.raises(ValueError):
        gen_er_connected(5, 1.5, Rng(0))


def test_determinism_same_seed_same_bytes():
    a = graph_to_json(gen_er_connected(10, 0.5, Rng(42)))
    b = graph_to_json(gen_er_connected(10, 0.5, Rng(42)))
    assert a == b
    c = graph_to_json(gen_euclidean_complete(10, Rng(42)))
    d = graph_to_json(gen_euclidean_complete(10, Rng(42)))
    assert c == d


def test_split_streams_are_independent():
    rng = Rng(42)
    a = rng.split("data")
    b = rng.split("init")
    assert a.uniform() != b.uniform()
    assert Rng(42).split("data").uniform() == Rng(42).split("data").uniform()


def test_serialization_round_trip_bit_exact():
    for g in (gen_euclidean_complete(8, Rng(1)), gen_er_connected(8, 0.5, Rng(1))):
        h = graph_from_json(graph_to_json(g))
        assert np.array_equal(g.weights, h.weights)
        assert np.array_equal(g.adj, h.adj)
        if g.positions is None:
            assert h.positions is None
        else:
            assert np.array_equal(g.positions, h.positions)
        assert graph_to_json(h) == graph_to_json(g)


# --- apsp ------------------------------------------------------------------


def brute_force_apsp(g: WeightedGraph) -> np.ndarray:
    """Exhaustive simple-path enumeration with suffix-safe pruning.

    Explores every simple path whose running front-to-back sum is below the
    best known distance to its endpoint; positive weights make the pruning
    exact, so the result is the true minimum over all simple paths.
    """
    n = g.n
    best = np.full((n, n), np.inf)
    np.fill_diagonal(best, 0.0)
    neighbors = [np.nonzero(g.adj[u])[0] for u in range(n)]

    def extend(source, node, cost, visited):
        for v in neighbors[node]:
            if visited & (1 << v):
                continue
            c = cost + g.weights[node, v]
            if c >= best[source, v]:
                continue
            best[source, v] = c
            extend(source, int(v), c, visited | (1 << v))

    for s in range(n):
        extend(s, s, 0.0, 1 << s)
    return best


def test_apsp_path_graph():
    g = path_graph([1.0, 2.0])
    d = apsp_matrix(g)
    assert d[0, 2] == 3.0
    assert d[2, 0] == 3.0
    assert np.all(np.diag(d) == 0.0)


def test_apsp_metric_complete_equals_weights():
    g = gen_euclidean_complete(10, Rng(4))
    assert np.array_equal(apsp_matrix(g), g.weights)


def test_apsp_matches_exhaustive_path_enumeration():
    rng = Rng(77)
    for i in range(200):
        n = int(rng.integers(3, 13))
        g = gen_er_connected(n, 0.5, rng)
        assert np.array_equal(apsp_matrix(g), brute_force_apsp(g))


def test_apsp_at_most_direct_edge_weight():
    rng = Rng(31)
    for _ in range(20):
        g = gen_er_connected(10, 0.4, rng)
        d = apsp_matrix(g)
        assert np.all(d[g.adj] <= g.weights[g.adj])


def test_apsp_nearly_symmetric_and_triangle():
    g = gen_er_connected(12, 0.5, Rng(9))
    d = apsp_matrix(g)
    assert np.max(np.abs(d - d.T)) <= 1e-12
    for k in range(12):
        assert np.all(d <= d[:, k, None] + d[None, k, :] + 1e-12)


def test_apsp_rejects_disconnected():
    n = 4
    g = WeightedGraph(n, np.zeros((n, n)), np.zeros((n, n), dtype=bool))
    with pytest.raises(ValueError):
        apsp_matrix(g)


# --- connectivity ----------------------------------------------------------


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        self.parent[self.find(a)] = self.find(b)


def union_find_connected(g: WeightedGraph) -> bool:
    uf = UnionFind(g.n)
    for i, j, _ in g.edge_list():
        uf.union(i, j)
    return len({uf.find(i) for i in range(g.n)}) == 1


def test_is_connected_trivial_cases():
    assert is_connected(gen_euclidean_complete(5, Rng(0)))
    g = WeightedGraph(2, np.zeros((2, 2)), np.zeros((2, 2), dtype=bool))
    assert not is_connected(g)


def test_is_connected_matches_union_find():
    rng = Rng(55)
    for _ in range(200):
        n = int(rng.integers(2, 12))
        p = float(rng.uniform(0.1, 0.9))
        upper = np.triu(rng.uniform(0, 1, (n, n)) < p, k=1)
        adj = upper | upper.T
        weights = np.where(adj, 0.5, 0.0)
        g = WeightedGraph(n, weights, adj)
        assert is_connected(g) == union_find_connected(g)
