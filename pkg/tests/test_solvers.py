import itertools
import math

import numpy as np
import pytest

from algoreason.co_tasks import CenterSet, Tour, tour_cost, vkc_objective
from algoreason.graphs import (
    WeightedGraph,
    apsp_matrix,
    euclidean_from_positions,
    gen_er_connected,
    gen_euclidean_complete,
)
from algoreason.rng import Rng
from algoreason.solvers import (
    SizeLimitError,
    beam_weight_tour,
    christofides,
    gon_farthest_first,
    greedy_nn_tour,
    held_karp,
    min_weight_perfect_matching,
    prim_mst_edges,
    vkc_exact,
)
from test_co_decode import unit_square_graph, equilateral_graph
from test_graphs import path_graph


def exhaustive_tsp(g: WeightedGraph) -> float:
    best = np.inf
    for rest in itertools.permutations(range(1, g.n)):
        best = min(best, tour_cost(g, Tour(np.array((0,) + rest))))
    return best


def exhaustive_vkc(g: WeightedGraph, k: int) -> float:
    d = apsp_matrix(g)
    best = np.inf
    for r in range(1, k + 1):
        for combo in itertools.combinations(range(g.n), r):
            best = min(best, d[:, list(combo)].min(axis=1).max())
    return float(best)


# --- greedy -----------------------------------------------------------------


def test_greedy_collinear_points_in_order():
    g = euclidean_from_positions(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]))
    assert greedy_nn_tour(g, 0).order.tolist() == [0, 1, 2]


def test_greedy_always_valid_and_at_least_optimal():
    rng = Rng(1)
    for _ in range(50):
        n = int(rng.integers(4, 11))
        g = gen_euclidean_complete(n, rng)
        tour = greedy_nn_tour(g, int(rng.integers(n)))
        assert np.array_equal(np.sort(tour.order), np.arange(n))
        opt, _ = held_karp(g)
        assert tour_cost(g, tour) >= opt


# --- beam over weights --------------------------------------------------------


def test_beam_width_one_equals_greedy():
    rng = Rng(2)
    for _ in range(30):
        n = int(rng.integers(4, 12))
        g = gen_euclidean_complete(n, rng)
        start = int(rng.integers(n))
        assert np.array_equal(beam_weight_tour(g, start, 1).order, greedy_nn_tour(g, start).order)


def test_beam_full_width_is_optimal_small_n():
    rng = Rng(3)
    for _ in range(10):
        n = int(rng.integers(4, 8))
        g = gen_euclidean_complete(n, rng)
        opt, _ = held_karp(g)
        width = int(math.factorial(n - 1))
        assert abs(tour_cost(g, beam_weight_tour(g, 0, width)) - opt) < 1e-12


def test_beam_quality_monotone_in_width():
    rng = Rng(4)
    for _ in range(20):
        g = gen_euclidean_complete(9, rng)
        costs = [tour_cost(g, beam_weight_tour(g, 0, w)) for w in (1, 4, 16, 64, 256)]
        assert all(b <= a + 1e-12 for a, b in zip(costs, costs[1:]))


# --- Christofides ----------------------------------------------------------------


def test_christofides_unit_square_is_optimal():
    result = christofides(unit_square_graph())
    assert result.exact_matching
    assert tour_cost(unit_square_graph(), result.tour) == 4.0


def test_christofides_respects_150_percent_bound():
    rng = Rng(5)
    for _ in range(100):
        n = int(rng.integers(4, 13))
        g = gen_euclidean_complete(n, rng)
        result = christofides(g)
        assert result.exact_matching
        opt, _ = held_karp(g)
        assert tour_cost(g, result.tour) <= 1.5 * opt + 1e-12


def test_christofides_odd_set_even_and_matching_cost():
    rng = Rng(6)
    for _ in range(30):
        g = gen_euclidean_complete(int(rng.integers(4, 12)), rng)
        mst = prim_mst_edges(g)
        degree = np.zeros(g.n, dtype=int)
        for a, b in mst:
            degree[a] += 1
            degree[b] += 1
        odd = np.nonzero(degree % 2)[0]
        assert len(odd) % 2 == 0
        if len(odd) >= 2:
            sub = g.weights[np.ix_(odd, odd)]
            pairs = min_weight_perfect_matching(sub)
            got = sum(sub[a, b] for a, b in pairs)
            best = min(  # brute-force matching oracle
                sum(sub[p[2 * i], p[2 * i + 1]] for i in range(len(odd) // 2))
                for p in itertools.permutations(range(len(odd)))
                if all(p[2 * i] < p[2 * i + 1] for i in range(len(odd) // 2))
            )
            assert abs(got - best) < 1e-12


def test_christofides_rejects_incomplete_and_nonmetric():
    with pytest.raises(ValueError):
        christofides(path_graph([1.0, 1.0]))
    w = np.array([[0.0, 1.0, 10.0], [1.0, 0.0, 1.0], [10.0, 1.0, 0.0]])
    g = WeightedGraph(3, w, ~np.eye(3, dtype=bool))
    with pytest.raises(ValueError):
        christofides(g)


# --- Held-Karp --------------------------------------------------------------------


def test_held_karp_equilateral_triangle():
    cost, _ = held_karp(equilateral_graph())
    assert abs(cost - 3.0) < 1e-12


def test_held_karp_unit_square():
    cost, tour = held_karp(unit_square_graph())
    assert cost == 4.0
    assert tour_cost(unit_square_graph(), tour) == cost


def test_held_karp_matches_exhaustive():
    rng = Rng(7)
    for _ in range(100):
        n = int(rng.integers(4, 9))
        g = gen_euclidean_complete(n, rng)
        cost, tour = held_karp(g)
        assert cost == exhaustive_tsp(g)
        assert tour_cost(g, tour) == cost


def test_held_karp_guard():
    g = gen_euclidean_complete(19, Rng(8))
    with pytest.raises(SizeLimitError):
        held_karp(g)
    # widening the guard explicitly is allowed
    cost, tour = held_karp(gen_euclidean_complete(10, Rng(9)), size_guard=12)
    assert tour_cost(gen_euclidean_complete(10, Rng(9)), tour) == cost


# --- farthest-first ------------------------------------------------------------------


def star_graph(spokes: int) -> WeightedGraph:
    n = spokes + 1
    w = np.zeros((n, n))
    adj = np.zeros((n, n), dtype=bool)
    for v in range(1, n):
        w[0, v] = w[v, 0] = 1.0
        adj[0, v] = adj[v, 0] = True
    return WeightedGraph(n, w, adj)


def test_gon_k_equals_n_objective_zero():
    g = gen_er_connected(6, 0.5, Rng(10))
    c = gon_farthest_first(g, 6, 0)
    assert vkc_objective(g, c) == 0.0


def test_gon_star_hub_first():
    g = star_graph(5)
    c = gon_farthest_first(g, 1, 0)
    assert c.centers == (0,)
    assert vkc_objective(g, c) == 1.0


def test_gon_within_twice_optimal():
    rng = Rng(11)
    for _ in range(100):
        n = int(rng.integers(4, 13))
        g = gen_er_connected(n, 0.5, rng)
        k = int(rng.integers(1, 4))
        first = int(rng.integers(n))
        obj = vkc_objective(g, gon_farthest_first(g, k, first))
        opt, _ = vkc_exact(g, k)
        assert obj <= 2.0 * opt


# --- exact k-center -------------------------------------------------------------------


def test_vkc_exact_trivial_cases():
    g = path_graph([1.0, 1.0])
    opt, centers = vkc_exact(g, 1)
    assert opt == 1.0 and centers.centers == (1,)
    g2 = gen_er_connected(5, 0.6, Rng(12))
    opt2, centers2 = vkc_exact(g2, 5)
    assert opt2 == 0.0 and len(centers2.centers) <= 5


def test_vkc_exact_matches_exhaustive():
    rng = Rng(13)
    for _ in range(100):
        n = int(rng.integers(4, 11))
        g = gen_er_connected(n, 0.5, rng)
        k = int(rng.integers(1, 4))
        opt, centers = vkc_exact(g, k)
        assert opt == exhaustive_vkc(g, k)
        assert len(centers.centers) <= k
        assert vkc_objective(g, centers) == opt


def test_vkc_optimum_is_a_pairwise_distance():
    rng = Rng(14)
    for _ in range(50):
        g = gen_er_connected(int(rng.integers(4, 11)), 0.5, rng)
        opt, _ = vkc_exact(g, 2)
        assert opt in apsp_matrix(g)


def test_vkc_exact_guard():
    g = gen_euclidean_complete(21, Rng(15))
    with pytest.raises(SizeLimitError):
        vkc_exact(g, 5)
    # k <= 3 is allowed at any size
    opt, _ = vkc_exact(g, 3)
    assert opt > 0.0


# --- cross-oracle invariants -------------------------------------------------------------


def test_every_heuristic_at_least_held_karp():
    rng = Rng(16)
    for _ in range(20):
        g = gen_euclidean_complete(9, rng)
        opt, _ = held_karp(g)
        for tour in (
            greedy_nn_tour(g, 0),
            beam_weight_tour(g, 0, 32),
            christofides(g).tour,
        ):
            assert tour_cost(g, tour) >= opt
