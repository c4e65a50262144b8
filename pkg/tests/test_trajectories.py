import itertools

import numpy as np
import pytest

from algoreason.algorithms import (
    PRETRAIN_ALGORITHMS,
    decode_sorted_order,
    sample_trajectory,
    traj_activity_selection,
    traj_bellman_ford,
    traj_find_min,
    traj_floyd_warshall,
    traj_insertion_sort,
    traj_mst_prim,
    traj_task_scheduling,
)
from algoreason.features import (
    load_trajectories,
    save_trajectories,
    trajectory_from_json,
    trajectory_to_json,
    validate_trajectory,
)
from algoreason.graphs import WeightedGraph, apsp_matrix, gen_er_connected, gen_euclidean_complete
from algoreason.rng import Rng
from test_graphs import path_graph


def triangle(w01, w02, w12):
    w = np.array([[0.0, w01, w02], [w01, 0.0, w12], [w02, w12, 0.0]])
    return WeightedGraph(3, w, ~np.eye(3, dtype=bool))


# --- Bellman-Ford -----------------------------------------------------------


def test_bellman_ford_path_pointers():
    traj = traj_bellman_ford(path_graph([1.0, 1.0]), 0)
    assert traj.get("pi_out").tolist() == [0, 0, 1]


def test_bellman_ford_source_self_pointer():
    rng = Rng(1)
    for _ in range(20):
        g = gen_er_connected(8, 0.5, rng)
        s = int(rng.integers(8))
        traj = traj_bellman_ford(g, s)
        assert traj.get("pi_out")[s] == s


def test_bellman_ford_final_distances_equal_apsp_exactly():
    rng = Rng(2)
    for _ in range(50):
        g = gen_er_connected(int(rng.integers(4, 13)), 0.5, rng)
        s = int(rng.integers(g.n))
        traj = traj_bellman_ford(g, s)
        assert np.array_equal(traj.get("dist")[-1], apsp_matrix(g)[s])


def test_bellman_ford_pointers_match_brute_force_distances():
    # oracle: exhaustive enumeration of simple paths (via apsp oracle edges):
    # walking the returned pointers from any node must reproduce the shortest
    # distance to the source
    rng = Rng(3)
    for _ in range(30):
        g = gen_er_connected(int(rng.integers(4, 10)), 0.5, rng)
        s = int(rng.integers(g.n))
        traj = traj_bellman_ford(g, s)
        pi = traj.get("pi_out")
        d = apsp_matrix(g)[s]
        for v in range(g.n):
            cost, node = 0.0, v
            for _ in range(g.n):
                if node == s:
                    break
                cost += g.weights[int(pi[node]), node]
                node = int(pi[node])
            assert node == s
            assert abs(cost - d[v]) < 1e-9


# --- Prim -------------------------------------------------------------------


def kruskal_mst_weight(g: WeightedGraph) -> float:
    edges = sorted(g.edge_list(), key=lambda e: (e[2], e[0], e[1]))
    parent = list(range(g.n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    picked = []
    for i, j, w in edges:
        if find(i) != find(j):
            parent[find(i)] = find(j)
            picked.append(w)
    return float(np.sum(np.sort(np.asarray(picked))))


def mst_weight_from_parents(g, parents, root) -> float:
    ws = np.sort(np.array([g.weights[int(parents[i]), i] for i in range(g.n) if i != root]))
    return float(np.sum(ws))


def test_prim_unique_triangle_mst():
    g = triangle(1.0, 2.0, 3.0)
    parents = traj_mst_prim(g, 0).get("parent_out")
    used = sorted(g.weights[int(parents[i]), i] for i in range(3) if i != 0)
    assert used == [1.0, 2.0]


def test_prim_parents_form_spanning_tree():
    rng = Rng(4)
    for _ in range(30):
        g = gen_er_connected(int(rng.integers(3, 12)), 0.5, rng)
        root = int(rng.integers(g.n))
        parents = traj_mst_prim(g, root).get("parent_out")
        assert parents[root] == root
        for v in range(g.n):  # every node walks up to the root: acyclic + spanning
            node, hops = v, 0
            while node != root:
                assert g.adj[int(parents[node]), node]
                node = int(parents[node])
                hops += 1
                assert hops <= g.n
        assert sum(1 for i in range(g.n) if i != root) == g.n - 1


def test_prim_weight_matches_kruskal_exactly():
    rng = Rng(5)
    for _ in range(200):
        g = gen_er_connected(int(rng.integers(3, 13)), 0.5, rng)
        root = int(rng.integers(g.n))
        traj = traj_mst_prim(g, root)
        assert mst_weight_from_parents(g, traj.get("parent_out"), root) == kruskal_mst_weight(g)


def test_prim_one_node_per_step():
    g = gen_euclidean_complete(7, Rng(6))
    traj = traj_mst_prim(g, 2)
    assert traj.T == 7
    in_tree = traj.get("in_tree")
    assert np.array_equal(in_tree.sum(axis=1), np.arange(1, 8))


# --- find_min ----------------------------------------------------------------


def test_find_min_examples():
    assert np.argmax(traj_find_min(np.array([3.0, 1.0, 2.0])).get("argmin_out")) == 1
    assert np.argmax(traj_find_min(np.array([1.0, 2.0, 3.0])).get("argmin_out")) == 0


def test_find_min_matches_linear_scan():
    rng = Rng(7)
    for _ in range(100):
        values = rng.uniform(0, 1, int(rng.integers(1, 12)))
        traj = traj_find_min(values)
        assert np.argmax(traj.get("argmin_out")) == int(np.argmin(values))
        assert traj.T == len(values)


# --- activity selection -------------------------------------------------------


def max_compatible_intervals(starts, finishes) -> int:
    n = len(starts)
    best = 0
    for r in range(n, 0, -1):
        for combo in itertools.combinations(range(n), r):
            ordered = sorted(combo, key=lambda i: finishes[i])
            if all(starts[b] >= finishes[a] for a, b in zip(ordered, ordered[1:])):
                return r
    return best


def test_activity_selection_non_overlapping_all_selected():
    starts = np.array([0.0, 0.3, 0.6])
    finishes = np.array([0.2, 0.5, 0.9])
    assert traj_activity_selection(starts, finishes).get("selected_out").sum() == 3


def test_activity_selection_nested_selects_one():
    starts = np.array([0.0, 0.1, 0.2])
    finishes = np.array([1.0, 0.9, 0.8])
    assert traj_activity_selection(starts, finishes).get("selected_out").sum() == 1


def test_activity_selection_cardinality_is_optimal():
    rng = Rng(8)
    for _ in range(100):
        n = int(rng.integers(2, 11))
        a, b = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
        starts, finishes = np.minimum(a, b), np.maximum(a, b) + 1e-9
        traj = traj_activity_selection(starts, finishes)
        assert traj.get("selected_out").sum() == max_compatible_intervals(starts, finishes)


# --- task scheduling ----------------------------------------------------------


def best_schedule_profit(deadlines, profits) -> float:
    n = len(deadlines)
    best = 0.0
    for r in range(n + 1):
        for combo in itertools.combinations(range(n), r):
            by_deadline = sorted(deadlines[i] for i in combo)
            if all(d >= slot + 1 for slot, d in enumerate(by_deadline)):
                best = max(best, sum(profits[i] for i in combo))
    return best


def test_task_scheduling_all_late_deadlines():
    traj = traj_task_scheduling(np.array([5, 5, 5, 5, 5]), np.linspace(0.1, 0.5, 5))
    assert traj.get("accepted_out").sum() == 5


def test_task_scheduling_unit_deadlines_picks_max_profit():
    profits = np.array([0.2, 0.9, 0.5])
    traj = traj_task_scheduling(np.array([1, 1, 1]), profits)
    out = traj.get("accepted_out")
    assert out.sum() == 1 and out[1] == 1.0


def test_task_scheduling_profit_is_optimal():
    rng = Rng(9)
    for _ in range(100):
        n = int(rng.integers(1, 9))
        deadlines = np.asarray(rng.integers(1, n + 1, n))
        profits = rng.uniform(0, 1, n)
        traj = traj_task_scheduling(deadlines, profits)
        got = float(np.dot(traj.get("accepted_out"), profits))
        assert abs(got - best_schedule_profit(deadlines, profits)) < 1e-12


# --- Floyd-Warshall -----------------------------------------------------------


def test_floyd_warshall_two_nodes():
    g = path_graph([0.7])
    traj = traj_floyd_warshall(g)
    assert np.array_equal(traj.get("dist")[-1], g.weights)


def test_floyd_warshall_final_matches_apsp():
    rng = Rng(10)
    for _ in range(50):
        g = gen_er_connected(int(rng.integers(3, 11)), 0.5, rng)
        traj = traj_floyd_warshall(g)
        assert np.max(np.abs(traj.get("dist")[-1] - apsp_matrix(g))) <= 1e-12


def test_floyd_warshall_diagonal_zero_all_steps():
    g = gen_er_connected(8, 0.5, Rng(11))
    dist = traj_floyd_warshall(g).get("dist")
    for t in range(dist.shape[0]):
        assert np.all(np.diag(dist[t]) == 0.0)


# --- insertion sort -----------------------------------------------------------


def test_insertion_sort_already_sorted_identity_chain():
    pred = traj_insertion_sort(np.array([0.1, 0.2, 0.3, 0.4])).get("pred_out")
    assert pred.tolist() == [0, 0, 1, 2]


def test_insertion_sort_reverse_reverses_chain():
    pred = traj_insertion_sort(np.array([0.4, 0.3, 0.2, 0.1])).get("pred_out")
    assert pred.tolist() == [1, 2, 3, 3]


def test_insertion_sort_matches_reference_sort():
    rng = Rng(12)
    for _ in range(100):
        values = rng.uniform(0, 1, int(rng.integers(1, 12)))
        order = decode_sorted_order(traj_insertion_sort(values).get("pred_out"))
        assert order == sorted(range(len(values)), key=lambda i: values[i])


# --- cross-cutting properties ---------------------------------------------------


def test_all_trajectories_validate_and_bound_T():
    rng = Rng(13)
    for algo in PRETRAIN_ALGORITHMS:
        for _ in range(10):
            n = int(rng.integers(4, 11))
            traj = sample_trajectory(algo, n, rng, graph_dist="er")
            validate_trajectory(traj)
            assert traj.T <= n + 1


def test_final_hint_state_equals_outputs():
    rng = Rng(14)
    pairs = {
        "bellman_ford": ("pi", "pi_out"),
        "mst_prim": ("parent", "parent_out"),
        "find_min": ("argmin", "argmin_out"),
        "activity_selection": ("selected", "selected_out"),
        "task_scheduling": ("accepted", "accepted_out"),
        "floyd_warshall": ("pred", "pred_out"),
        "insertion_sort": ("pred", "pred_out"),
    }
    for algo, (hint, out) in pairs.items():
        traj = sample_trajectory(algo, 8, rng, graph_dist="er")
        assert np.array_equal(traj.get(hint)[-1], traj.get(out))


def test_trajectory_idempotence():
    g = gen_er_connected(9, 0.5, Rng(15))
    a = traj_bellman_ford(g, 3)
    b = traj_bellman_ford(g, 3)
    assert trajectory_to_json(a) == trajectory_to_json(b)


def test_trajectory_serialization_round_trip(tmp_path):
    rng = Rng(16)
    trajs = [sample_trajectory(a, 6, rng, graph_dist="er") for a in PRETRAIN_ALGORITHMS]
    path = tmp_path / "trajs.jsonl"
    save_trajectories(path, trajs)
    loaded = load_trajectories(path)
    for a, b in zip(trajs, loaded):
        assert trajectory_to_json(a) == trajectory_to_json(b)


def test_validation_rejects_bad_mask_one():
    traj = traj_find_min(np.array([2.0, 1.0]))
    bad = traj.get("argmin_out").copy()
    bad[:] = 1.0
    spec = traj.spec_named("argmin_out")
    traj.outputs[spec] = bad
    with pytest.raises(ValueError):
        validate_trajectory(traj)


def test_validation_rejects_out_of_range_pointer():
    traj = traj_insertion_sort(np.array([0.3, 0.1, 0.2]))
    spec = traj.spec_named("pred_out")
    traj.outputs[spec] = np.array([5, 0, 1])
    with pytest.raises(ValueError):
        validate_trajectory(traj)
