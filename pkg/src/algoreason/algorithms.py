"""Ground-truth execution trajectories for the pre-training algorithms.

Each generator runs the classical algorithm and records a snapshot of its
state per iteration: snapshot 0 is the initialized state, the last snapshot
is the final state. Non-graph tasks (min finding, sorting, interval
selection, scheduling) are laid out on n nodes with complete adjacency so a
single shared processor sees one interface for every algorithm.

Every algorithm exposes a node scalar input ``pos`` (index / n); algorithms
that scan in a sorted order additionally expose ``rank`` (scan order / n),
which encodes the sort pre-pass as an input.
"""

import numpy as np

from .features import FeatureSpec, Trajectory, validate_trajectory
from .graphs import WeightedGraph, gen_er_connected, gen_euclidean_complete, is_connected
from .rng import Rng

PRETRAIN_ALGORITHMS = (
    "bellman_ford",
    "mst_prim",
    "find_min",
    "activity_selection",
    "task_scheduling",
    "floyd_warshall",
    "insertion_sort",
)

# transfer presets: algorithm bundles used by the k-center ablations
ALGO_PRESETS = {
    "tsp_base": ("bellman_ford", "mst_prim"),
    "mtab": ("find_min", "task_scheduling", "activity_selection", "bellman_ford"),
    "fmitb": ("floyd_warshall", "find_min", "insertion_sort", "task_scheduling", "bellman_ford"),
}


def _in(name, location, kind):
    return FeatureSpec(name, "input", location, kind)


def _hint(name, location, kind):
    return FeatureSpec(name, "hint", location, kind)


def _out(name, location, kind):
    return FeatureSpec(name, "output", location, kind)


ALGO_FEATURES: dict[str, dict[str, FeatureSpec]] = {
    "bellman_ford": {
        "pos": _in("pos", "node", "scalar"),
        "source": _in("source", "node", "mask_one"),
        "weights": _in("weights", "edge", "scalar"),
        "adj": _in("adj", "edge", "mask"),
        "pi": _hint("pi", "node", "pointer"),
        "dist": _hint("dist", "node", "scalar"),
        "reached": _hint("reached", "node", "mask"),
        "pi_out": _out("pi_out", "node", "pointer"),
    },
    "mst_prim": {
        "pos": _in("pos", "node", "scalar"),
        "root": _in("root", "node", "mask_one"),
        "weights": _in("weights", "edge", "scalar"),
        "adj": _in("adj", "edge", "mask"),
        "parent": _hint("parent", "node", "pointer"),
        "in_tree": _hint("in_tree", "node", "mask"),
        "key": _hint("key", "node", "scalar"),
        # the node admitted to the tree this step: names the global argmin,
        # without it self-fed rollouts cannot track where the frontier moved
        "added": _hint("added", "node", "mask_one"),
        "parent_out": _out("parent_out", "node", "pointer"),
    },
    "find_min": {
        "pos": _in("pos", "node", "scalar"),
        "values": _in("values", "node", "scalar"),
        "adj": _in("adj", "edge", "mask"),
        "argmin": _hint("argmin", "node", "mask_one"),
        "scan": _hint("scan", "node", "mask_one"),
        "argmin_out": _out("argmin_out", "node", "mask_one"),
    },
    "activity_selection": {
        "pos": _in("pos", "node", "scalar"),
        "start": _in("start", "node", "scalar"),
        "finish": _in("finish", "node", "scalar"),
        "rank": _in("rank", "node", "scalar"),
        "adj": _in("adj", "edge", "mask"),
        "selected": _hint("selected", "node", "mask"),
        "scan": _hint("scan", "node", "mask_one"),
        "selected_out": _out("selected_out", "node", "mask"),
    },
    "task_scheduling": {
        "pos": _in("pos", "node", "scalar"),
        "deadline": _in("deadline", "node", "scalar"),
        "profit": _in("profit", "node", "scalar"),
        "rank": _in("rank", "node", "scalar"),
        "adj": _in("adj", "edge", "mask"),
        "accepted": _hint("accepted", "node", "mask"),
        "accepted_out": _out("accepted_out", "node", "mask"),
    },
    "floyd_warshall": {
        "pos": _in("pos", "node", "scalar"),
        "weights": _in("weights", "edge", "scalar"),
        "adj": _in("adj", "edge", "mask"),
        "dist": _hint("dist", "edge", "scalar"),
        "pred": _hint("pred", "edge", "pointer"),
        "pred_out": _out("pred_out", "edge", "pointer"),
    },
    "insertion_sort": {
        "pos": _in("pos", "node", "scalar"),
        "values": _in("values", "node", "scalar"),
        "adj": _in("adj", "edge", "mask"),
        "pred": _hint("pred", "node", "pointer"),
        "pred_out": _out("pred_out", "node", "pointer"),
    },
}


def algo_feature_specs(algo_id: str) -> dict[str, FeatureSpec]:
    if algo_id not in ALGO_FEATURES:
        raise KeyError(f"unknown algorithm {algo_id!r}")
    return ALGO_FEATURES[algo_id]


def _pos_input(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.float64) / n


def _complete_adj(n: int) -> np.ndarray:
    return (~np.eye(n, dtype=bool)).astype(np.float64)


def _build(algo_id, n, inputs, hint_steps, outputs) -> Trajectory:
    feats = ALGO_FEATURES[algo_id]
    T = len(hint_steps)
    hints = {}
    for name in hint_steps[0]:
        spec = feats[name]
        dtype = np.int64 if spec.kind == "pointer" else np.float64
        hints[spec] = np.stack([np.asarray(step[name], dtype=dtype) for step in hint_steps])
    traj = Trajectory(
        algo_id,
        n,
        T,
        {feats[k]: np.asarray(v) for k, v in inputs.items()},
        hints,
        {feats[k]: np.asarray(v) for k, v in outputs.items()},
    )
    validate_trajectory(traj)
    return traj


def traj_bellman_ford(g: WeightedGraph, source: int) -> Trajectory:
    """Synchronous Bellman-Ford relaxation until no distance changes.

    Distances of unreached nodes are stored as 0 with ``reached`` false; the
    source points to itself throughout.
    """
    n = g.n
    if source >= n:
        raise ValueError("source out of range")
    if not is_connected(g):
        raise ValueError("graph must be connected")

    pi = np.arange(n)
    dist = np.zeros(n)
    reached = np.zeros(n, dtype=bool)
    reached[source] = True

    def snapshot():
        return {
            "pi": pi.copy(),
            "dist": np.where(reached, dist, 0.0),
            "reached": reached.astype(np.float64),
        }

    steps = [snapshot()]
    for _ in range(n):
        new_pi, new_dist, new_reached = pi.copy(), dist.copy(), reached.copy()
        changed = False
        for i in range(n):
            best_d = dist[i] if reached[i] else np.inf
            best_j = -1
            for j in np.nonzero(g.adj[:, i] & reached)[0]:
                cand = dist[j] + g.weights[j, i]
                if cand < best_d:
                    best_d, best_j = cand, int(j)
            if best_j >= 0:
                new_pi[i], new_dist[i], new_reached[i] = best_j, best_d, True
                changed = True
        if not changed:
            break
        pi, dist, reached = new_pi, new_dist, new_reached
        steps.append(snapshot())

    one_hot = np.zeros(n)
    one_hot[source] = 1.0
    inputs = {
        "pos": _pos_input(n),
        "source": one_hot,
        "weights": g.weights,
        "adj": g.adj.astype(np.float64),
    }
    return _build("bellman_ford", n, inputs, steps, {"pi_out": pi.copy()})


def traj_mst_prim(g: WeightedGraph, root: int) -> Trajectory:
    """Prim's algorithm; one node joins the tree per snapshot (T = n)."""
    n = g.n
    if root >= n:
        raise ValueError("root out of range")
    if not is_connected(g):
        raise ValueError("graph must be connected")

    in_tree = np.zeros(n, dtype=bool)
    parent = np.arange(n)
    key = np.zeros(n)
    conn = np.zeros(n, dtype=bool)

    def attach(u):
        in_tree[u] = True
        for v in np.nonzero(g.adj[u] & ~in_tree)[0]:
            if not conn[v] or g.weights[u, v] < key[v]:
                key[v], parent[v], conn[v] = g.weights[u, v], u, True

    def snapshot(u):
        added = np.zeros(n)
        added[u] = 1.0
        return {
            "parent": parent.copy(),
            "in_tree": in_tree.astype(np.float64),
            "key": key.copy(),
            "added": added,
        }

    attach(root)
    steps = [snapshot(root)]
    for _ in range(n - 1):
        candidates = np.nonzero(~in_tree & conn)[0]
        u = int(candidates[np.argmin(key[candidates])])
        attach(u)
        steps.append(snapshot(u))

    one_hot = np.zeros(n)
    one_hot[root] = 1.0
    inputs = {
        "pos": _pos_input(n),
        "root": one_hot,
        "weights": g.weights,
        "adj": g.adj.astype(np.float64),
    }
    return _build("mst_prim", n, inputs, steps, {"parent_out": parent.copy()})


def traj_find_min(values: np.ndarray) -> Trajectory:
    """Left-to-right scan for the (first) minimum; T = n."""
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if n < 1:
        raise ValueError("need at least one value")

    steps = []
    best = 0
    for t in range(n):
        if values[t] < values[best]:
            best = t
        argmin = np.zeros(n)
        argmin[best] = 1.0
        scan = np.zeros(n)
        scan[t] = 1.0
        steps.append({"argmin": argmin, "scan": scan})

    inputs = {"pos": _pos_input(n), "values": values, "adj": _complete_adj(n)}
    return _build("find_min", n, inputs, steps, {"argmin_out": steps[-1]["argmin"].copy()})


def traj_activity_selection(starts: np.ndarray, finishes: np.ndarray) -> Trajectory:
    """Earliest-finish greedy interval selection, scanned in finish order."""
    starts = np.asarray(starts, dtype=np.float64)
    finishes = np.asarray(finishes, dtype=np.float64)
    n = len(starts)
    if len(finishes) != n or n < 1:
        raise ValueError("starts/finishes must be equal-length, non-empty")
    if np.any(finishes <= starts):
        raise ValueError("finishes must exceed starts")

    order = np.argsort(finishes, kind="stable")
    rank = np.empty(n)
    rank[order] = np.arange(n, dtype=np.float64) / n

    selected = np.zeros(n)
    last_finish = -np.inf
    steps = []
    for t, idx in enumerate(order):
        if starts[idx] >= last_finish:
            selected[idx] = 1.0
            last_finish = finishes[idx]
        scan = np.zeros(n)
        scan[idx] = 1.0
        steps.append({"selected": selected.copy(), "scan": scan})

    inputs = {
        "pos": _pos_input(n),
        "start": starts,
        "finish": finishes,
        "rank": rank,
        "adj": _complete_adj(n),
    }
    return _build("activity_selection", n, inputs, steps, {"selected_out": selected.copy()})


def traj_task_scheduling(deadlines: np.ndarray, profits: np.ndarray) -> Trajectory:
    """Unit-time scheduling: take tasks by descending profit, latest free slot.

    Deadlines are positive integers (slot indices); the exchange-argument
    greedy is profit-optimal. The deadline input feature is stored as
    deadline / n to keep scalars in a comparable range.
    """
    deadlines = np.asarray(deadlines)
    profits = np.asarray(profits, dtype=np.float64)
    n = len(deadlines)
    if len(profits) != n or n < 1:
        raise ValueError("deadlines/profits must be equal-length, non-empty")
    if not np.issubdtype(deadlines.dtype, np.integer) or np.any(deadlines < 1):
        raise ValueError("deadlines must be positive integers")

    order = np.argsort(-profits, kind="stable")
    rank = np.empty(n)
    rank[order] = np.arange(n, dtype=np.float64) / n

    slot_free = np.ones(n + 1, dtype=bool)  # slots 1..n
    accepted = np.zeros(n)
    steps = []
    for idx in order:
        latest = min(int(deadlines[idx]), n)
        slot = next((s for s in range(latest, 0, -1) if slot_free[s]), 0)
        if slot > 0:
            slot_free[slot] = False
            accepted[idx] = 1.0
        steps.append({"accepted": accepted.copy()})

    inputs = {
        "pos": _pos_input(n),
        "deadline": deadlines.astype(np.float64) / n,
        "profit": profits,
        "rank": rank,
        "adj": _complete_adj(n),
    }
    return _build("task_scheduling", n, inputs, steps, {"accepted_out": accepted.copy()})


def traj_floyd_warshall(g: WeightedGraph) -> Trajectory:
    """Distance/predecessor matrices after each pivot k; T = n.

    Pairs not yet reachable store distance 0 and a self-predecessor
    (pred[i, j] = j); on connected inputs the final snapshot is fully
    reachable.
    """
    n = g.n
    if not is_connected(g):
        raise ValueError("graph must be connected")

    dist = np.where(g.adj, g.weights, np.inf)
    np.fill_diagonal(dist, 0.0)
    pred = np.where(g.adj, np.arange(n)[:, None], np.arange(n)[None, :])
    np.fill_diagonal(pred, np.arange(n))

    steps = []
    for k in range(n):
        via = dist[:, k, None] + dist[None, k, :]
        better = via < dist
        np.fill_diagonal(better, False)
        dist = np.where(better, via, dist)
        pred = np.where(better, pred[k, :][None, :], pred)
        steps.append(
            {"dist": np.where(np.isfinite(dist), dist, 0.0), "pred": pred.copy()}
        )

    inputs = {"pos": _pos_input(n), "weights": g.weights, "adj": g.adj.astype(np.float64)}
    return _build("floyd_warshall", n, inputs, steps, {"pred_out": pred.copy()})


def traj_insertion_sort(values: np.ndarray) -> Trajectory:
    """Stable insertion sort over a linked-list encoding.

    The running sequence is <sorted prefix> + <untouched suffix>; ``pred``
    maps each element to its predecessor in that sequence, with the head
    pointing to itself. Snapshot t is the state after inserting element t.
    """
    values = np.asarray(values, dtype=np.float64)
    n = len(values)
    if n < 1:
        raise ValueError("need at least one value")

    def preds_of(seq):
        pred = np.empty(n, dtype=np.int64)
        pred[seq[0]] = seq[0]
        for a, b in zip(seq, seq[1:]):
            pred[b] = a
        return pred

    prefix = [0]
    steps = [{"pred": preds_of(prefix + list(range(1, n)))}]
    for t in range(1, n):
        spot = next((i for i, e in enumerate(prefix) if values[e] > values[t]), len(prefix))
        prefix.insert(spot, t)
        steps.append({"pred": preds_of(prefix + list(range(t + 1, n)))})

    inputs = {"pos": _pos_input(n), "values": values, "adj": _complete_adj(n)}
    return _build("insertion_sort", n, inputs, steps, {"pred_out": steps[-1]["pred"].copy()})


def decode_sorted_order(pred: np.ndarray) -> list[int]:
    """Recover the sequence encoded by predecessor pointers."""
    n = len(pred)
    heads = [i for i in range(n) if pred[i] == i]
    if len(heads) != 1:
        raise ValueError("pointer list must have exactly one head")
    successor = {int(pred[i]): i for i in range(n) if pred[i] != i}
    order = [heads[0]]
    while len(order) < n:
        order.append(successor[order[-1]])
    return order


def sample_trajectory(algo_id: str, n: int, rng: Rng, graph_dist: str = "euclidean",
                      er_p: float = 0.5) -> Trajectory:
    """Sample one random instance of an algorithm and record its trajectory."""

    def graph():
        if graph_dist == "euclidean":
            return gen_euclidean_complete(n, rng)
        if graph_dist == "er":
            return gen_er_connected(n, er_p, rng)
        raise ValueError(f"unknown graph distribution {graph_dist!r}")

    if algo_id == "bellman_ford":
        return traj_bellman_ford(graph(), int(rng.integers(n)))
    if algo_id == "mst_prim":
        return traj_mst_prim(graph(), int(rng.integers(n)))
    if algo_id == "find_min":
        return traj_find_min(rng.uniform(0.0, 1.0, n))
    if algo_id == "activity_selection":
        a = rng.uniform(0.0, 1.0, n)
        b = rng.uniform(0.0, 1.0, n)
        return traj_activity_selection(np.minimum(a, b), np.maximum(a, b) + 1e-9)
    if algo_id == "task_scheduling":
        return traj_task_scheduling(rng.integers(1, n + 1, n), rng.uniform(0.0, 1.0, n))
    if algo_id == "floyd_warshall":
        return traj_floyd_warshall(graph())
    if algo_id == "insertion_sort":
        return traj_insertion_sort(rng.uniform(0.0, 1.0, n))
    raise KeyError(f"unknown algorithm {algo_id!r}")
