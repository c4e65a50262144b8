"""Optimization task instances and solution decoding.

TSP solutions are node permutations (tours); the model predicts, for every
node, a distribution over which node precedes it in the tour, and beam
search assembles the highest-likelihood valid tour. K-center solutions are
small vertex subsets; the model scores node membership and the top-k nodes
are taken.
"""

from dataclasses import dataclass, field

import numpy as np

from .features import FeatureSpec
from .graphs import WeightedGraph, apsp_matrix, graph_from_json, graph_to_json
from .serialize import dumps, loads

CO_TASKS = ("tsp", "vkc")

TSP_FEATURES: dict[str, FeatureSpec] = {
    "pos": FeatureSpec("pos", "input", "node", "scalar"),
    "start": FeatureSpec("start", "input", "node", "mask"),
    "dist": FeatureSpec("dist", "input", "edge", "scalar"),
    "adj": FeatureSpec("adj", "input", "edge", "mask"),
    "tour_pred": FeatureSpec("tour_pred", "output", "node", "pointer"),
}

VKC_FEATURES: dict[str, FeatureSpec] = {
    "pos": FeatureSpec("pos", "input", "node", "scalar"),
    "weights": FeatureSpec("weights", "input", "edge", "scalar"),
    "adj": FeatureSpec("adj", "input", "edge", "mask"),
    "centers": FeatureSpec("centers", "output", "node", "mask"),
}


def co_feature_specs(task: str) -> dict[str, FeatureSpec]:
    if task == "tsp":
        return TSP_FEATURES
    if task == "vkc":
        return VKC_FEATURES
    raise KeyError(f"unknown task {task!r}")


@dataclass
class Tour:
    """Visiting order over all n nodes; the edge back to order[0] is implicit."""

    order: np.ndarray

    def __post_init__(self):
        self.order = np.asarray(self.order, dtype=np.int64)
        n = len(self.order)
        if n < 2 or not np.array_equal(np.sort(self.order), np.arange(n)):
            raise ValueError("tour must be a permutation of 0..n-1")

    @property
    def start(self) -> int:
        return int(self.order[0])

    def predecessor_pointers(self) -> np.ndarray:
        """pointers[v] = node visited immediately before v (cyclically)."""
        n = len(self.order)
        pointers = np.empty(n, dtype=np.int64)
        for i, v in enumerate(self.order):
            pointers[v] = self.order[i - 1]
        return pointers


@dataclass
class CenterSet:
    centers: tuple[int, ...]

    def __post_init__(self):
        self.centers = tuple(sorted(int(c) for c in set(self.centers)))
        if not self.centers:
            raise ValueError("center set must be non-empty")


@dataclass
class TspInstance:
    graph: WeightedGraph
    start: int
    opt_cost: float | None = None
    opt_tour: Tour | None = None

    def __post_init__(self):
        if not np.all(self.graph.adj == ~np.eye(self.graph.n, dtype=bool)):
            raise ValueError("TSP instances must be complete graphs")
        if not 0 <= self.start < self.graph.n:
            raise ValueError("start out of range")


@dataclass
class VkcInstance:
    graph: WeightedGraph
    k: int
    opt_objective: float | None = None
    opt_centers: CenterSet | None = None
    apsp: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if not 1 <= self.k <= self.graph.n:
            raise ValueError("k must be in 1..n")

    def distances(self) -> np.ndarray:
        if self.apsp is None:
            self.apsp = apsp_matrix(self.graph)
        return self.apsp


def tour_cost(g: WeightedGraph, tour: Tour) -> float:
    """Total edge weight of the closed tour.

    The n edge weights are summed in sorted order, so every rotation or
    reversal of the same cyclic tour yields bit-identical cost; two methods
    that find the same tour can never disagree by an ulp.
    """
    order = tour.order
    if len(order) != g.n:
        raise ValueError("tour length does not match graph")
    edges = g.weights[order, np.roll(order, -1)]
    return float(np.sum(np.sort(edges)))


def log_softmax_rows(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def tour_log_score(log_probs: np.ndarray, order: np.ndarray) -> float:
    """Sum of predecessor log-probabilities along a closed tour."""
    total = 0.0
    for prev, node in zip(order, order[1:]):
        total += log_probs[node, prev]
    return float(total + log_probs[order[0], order[-1]])


def width_ladder(width: int) -> list[int]:
    """Powers of two below ``width``, then ``width`` itself."""
    ladder = []
    w = 1
    while w < width:
        ladder.append(w)
        w *= 2
    ladder.append(width)
    return ladder


def _raw_beam(log_probs: np.ndarray, start: int, width: int) -> tuple[np.ndarray, float]:
    n = log_probs.shape[0]
    tours = np.array([[start]])
    scores = np.zeros(1)
    visited = np.zeros((1, n), dtype=bool)
    visited[0, start] = True

    for _ in range(n - 1):
        lasts = tours[:, -1]
        cand = scores[:, None] + log_probs[:, lasts].T  # (beams, candidate node)
        cand[visited] = -np.inf
        flat = cand.reshape(-1)
        k = min(width, int(np.isfinite(flat).sum()))
        top = np.argsort(-flat, kind="stable")[:k]
        beam_idx, node_idx = np.divmod(top, n)
        tours = np.concatenate([tours[beam_idx], node_idx[:, None]], axis=1)
        scores = flat[top]
        visited = visited[beam_idx].copy()
        visited[np.arange(k), node_idx] = True

    totals = scores + log_probs[start, tours[:, -1]]
    best = int(np.argmax(totals))
    return tours[best], float(totals[best])


def beam_search_tour(pointer_logits: np.ndarray, start: int, width: int) -> Tour:
    """Most-likely valid tour under per-node predecessor distributions.

    Row j of ``pointer_logits`` scores which node precedes j. Partial tours
    grow from ``start``; appending j after node i adds log softmax(row j)[i];
    the total score includes the closing edge back to ``start``. Beams are
    run at every width on the doubling ladder up to ``width`` and the best
    completed tour wins, which makes the returned score non-decreasing in
    width along nested ladders (a single pruning pass is not monotone).
    """
    n = pointer_logits.shape[0]
    if pointer_logits.shape != (n, n):
        raise ValueError("pointer_logits must be n×n")
    if n < 3:
        raise ValueError("tours need at least 3 nodes")
    if width < 1:
        raise ValueError("width must be >= 1")
    log_probs = log_softmax_rows(pointer_logits)

    best_tour, best_score = None, -np.inf
    for w in width_ladder(width):
        tour, score = _raw_beam(log_probs, start, w)
        if score > best_score:
            best_tour, best_score = tour, score
    return Tour(best_tour)


def topk_centers(node_probs: np.ndarray, k: int) -> CenterSet:
    """The k highest-scoring nodes, ties resolved toward lower indices."""
    node_probs = np.asarray(node_probs, dtype=np.float64)
    if not 1 <= k <= len(node_probs):
        raise ValueError("k must be in 1..n")
    order = np.argsort(-node_probs, kind="stable")
    return CenterSet(tuple(int(i) for i in order[:k]))


def vkc_objective(g: WeightedGraph, centers: CenterSet, dists: np.ndarray | None = None) -> float:
    """Worst-case shortest-path distance from any node to its nearest center."""
    d = apsp_matrix(g) if dists is None else dists
    idx = list(centers.centers)
    if any(not 0 <= c < g.n for c in idx):
        raise ValueError("center out of range")
    return float(d[:, idx].min(axis=1).max())


def relative_error(cost: float, optimal: float) -> float:
    """cost / optimal - 1."""
    if optimal <= 0.0:
        raise ValueError("optimal must be positive")
    return cost / optimal - 1.0


# --- model-facing feature values and on-disk records -------------------------


def tsp_input_features(inst: TspInstance) -> dict[FeatureSpec, np.ndarray]:
    n = inst.graph.n
    start = np.zeros(n)
    start[inst.start] = 1.0
    return {
        TSP_FEATURES["pos"]: np.arange(n, dtype=np.float64) / n,
        TSP_FEATURES["start"]: start,
        TSP_FEATURES["dist"]: inst.graph.weights,
        TSP_FEATURES["adj"]: inst.graph.adj.astype(np.float64),
    }


def tsp_target(inst: TspInstance) -> np.ndarray:
    if inst.opt_tour is None:
        raise ValueError("instance has no ground-truth tour")
    return inst.opt_tour.predecessor_pointers()


def vkc_input_features(inst: VkcInstance) -> dict[FeatureSpec, np.ndarray]:
    n = inst.graph.n
    return {
        VKC_FEATURES["pos"]: np.arange(n, dtype=np.float64) / n,
        VKC_FEATURES["weights"]: inst.graph.weights,
        VKC_FEATURES["adj"]: inst.graph.adj.astype(np.float64),
    }


def vkc_target(inst: VkcInstance) -> np.ndarray:
    if inst.opt_centers is None:
        raise ValueError("instance has no ground-truth centers")
    mask = np.zeros(inst.graph.n)
    mask[list(inst.opt_centers.centers)] = 1.0
    return mask


def tsp_instance_to_json(inst: TspInstance) -> str:
    obj = {"graph": loads(graph_to_json(inst.graph)), "start": inst.start}
    if inst.opt_tour is not None:
        obj["opt_cost"] = float(inst.opt_cost)
        obj["opt_tour"] = [int(v) for v in inst.opt_tour.order]
    return dumps(obj)


def tsp_instance_from_json(line: str) -> TspInstance:
    obj = loads(line)
    graph = graph_from_json(dumps(obj["graph"]))
    tour = Tour(np.asarray(obj["opt_tour"])) if "opt_tour" in obj else None
    cost = obj.get("opt_cost")
    return TspInstance(graph, obj["start"], cost, tour)


def vkc_instance_to_json(inst: VkcInstance) -> str:
    obj = {"graph": loads(graph_to_json(inst.graph)), "k": inst.k}
    if inst.opt_centers is not None:
        obj["opt_objective"] = float(inst.opt_objective)
        obj["opt_centers"] = list(inst.opt_centers.centers)
    return dumps(obj)


def vkc_instance_from_json(line: str) -> VkcInstance:
    obj = loads(line)
    graph = graph_from_json(dumps(obj["graph"]))
    centers = CenterSet(tuple(obj["opt_centers"])) if "opt_centers" in obj else None
    return VkcInstance(graph, obj["k"], obj.get("opt_objective"), centers)
