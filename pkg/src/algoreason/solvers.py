"""Deterministic heuristics and exact desk-scale oracles.

TSP: nearest-neighbour greedy, width-limited beam search over edge weights,
Christofides (exact matching via bitmask DP up to 18 odd-degree nodes), and
an exact Held-Karp dynamic program. K-center: farthest-first traversal and
an exact solver that binary-searches candidate radii with branch-and-bound
set cover. Oracles cap instance size; the caps can be widened explicitly
where memory allows.
"""

from dataclasses import dataclass

import numpy as np

from .co_tasks import CenterSet, Tour, tour_cost, width_ladder
from .graphs import WeightedGraph, apsp_matrix

HELD_KARP_DEFAULT_GUARD = 18
MATCHING_EXACT_LIMIT = 18
METRIC_TOL = 1e-9


class SizeLimitError(ValueError):
    """Instance exceeds an exact oracle's tractability guard."""


def greedy_nn_tour(g: WeightedGraph, start: int) -> Tour:
    """Repeatedly visit the nearest unvisited node; ties to lowest index."""
    n = g.n
    order = [start]
    visited = np.zeros(n, dtype=bool)
    visited[start] = True
    for _ in range(n - 1):
        dists = np.where(visited, np.inf, g.weights[order[-1]])
        order.append(int(np.argmin(dists)))
        visited[order[-1]] = True
    return Tour(np.array(order))


def _raw_weight_beam(g: WeightedGraph, start: int, width: int) -> tuple[np.ndarray, float]:
    n = g.n
    tours = np.array([[start]])
    costs = np.zeros(1)
    visited = np.zeros((1, n), dtype=bool)
    visited[0, start] = True

    for _ in range(n - 1):
        lasts = tours[:, -1]
        cand = costs[:, None] + g.weights[lasts]  # (beams, node)
        cand[visited] = np.inf
        flat = cand.reshape(-1)
        k = min(width, int(np.isfinite(flat).sum()))
        top = np.argsort(flat, kind="stable")[:k]
        beam_idx, node_idx = np.divmod(top, n)
        tours = np.concatenate([tours[beam_idx], node_idx[:, None]], axis=1)
        costs = flat[top]
        visited = visited[beam_idx].copy()
        visited[np.arange(k), node_idx] = True

    totals = costs + g.weights[tours[:, -1], start]
    best = int(np.argmin(totals))
    return tours[best], float(totals[best])


def beam_weight_tour(g: WeightedGraph, start: int, width: int = 1280) -> Tour:
    """Beam search over partial tours scored by negative accumulated weight.

    Runs every width on the doubling ladder up to ``width`` and keeps the
    cheapest completed tour (cost non-increasing along nested ladders);
    width 1 reduces exactly to the nearest-neighbour greedy.
    """
    if width < 1:
        raise ValueError("width must be >= 1")
    best_tour, best_cost = None, np.inf
    for w in width_ladder(width):
        tour, cost = _raw_weight_beam(g, start, w)
        if cost < best_cost:
            best_tour, best_cost = tour, cost
    return Tour(best_tour)


# --- Christofides ------------------------------------------------------------


@dataclass
class ChristofidesResult:
    tour: Tour
    exact_matching: bool


def _require_complete_metric(g: WeightedGraph) -> None:
    if not np.all(g.adj == ~np.eye(g.n, dtype=bool)):
        raise ValueError("christofides requires a complete graph")
    w = g.weights
    for k in range(g.n):
        if np.any(w > w[:, k, None] + w[None, k, :] + METRIC_TOL):
            raise ValueError("christofides requires metric edge weights")


def prim_mst_edges(g: WeightedGraph) -> list[tuple[int, int]]:
    n = g.n
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    key = g.weights[0].copy()
    parent = np.zeros(n, dtype=np.int64)
    key[0] = np.inf
    edges = []
    for _ in range(n - 1):
        u = int(np.argmin(np.where(in_tree, np.inf, key)))
        edges.append((int(parent[u]), u))
        in_tree[u] = True
        key[u] = np.inf
        closer = ~in_tree & (g.weights[u] < key)
        key[closer] = g.weights[u][closer]
        parent[closer] = u
    return edges


def min_weight_perfect_matching(weights: np.ndarray) -> list[tuple[int, int]]:
    """Exact minimum-weight perfect matching by DP over vertex subsets."""
    m = weights.shape[0]
    if m % 2:
        raise ValueError("need an even number of vertices")
    if m == 0:
        return []
    full = (1 << m) - 1
    dp = np.full(1 << m, np.inf)
    choice = np.full(1 << m, -1, dtype=np.int64)
    dp[0] = 0.0
    for mask in range(1, full + 1):
        if bin(mask).count("1") % 2:
            continue
        i = (mask & -mask).bit_length() - 1  # lowest set vertex pairs first
        rest = mask ^ (1 << i)
        j = rest
        while j:
            b = (j & -j).bit_length() - 1
            prev = rest ^ (1 << b)
            cand = dp[prev] + weights[i, b]
            if cand < dp[mask]:
                dp[mask] = cand
                choice[mask] = b
            j ^= 1 << b
    pairs = []
    mask = full
    while mask:
        i = (mask & -mask).bit_length() - 1
        b = int(choice[mask])
        pairs.append((i, b))
        mask ^= (1 << i) | (1 << b)
    return pairs


def greedy_matching(weights: np.ndarray) -> list[tuple[int, int]]:
    m = weights.shape[0]
    unmatched = list(range(m))
    pairs = []
    while unmatched:
        i = unmatched.pop(0)
        best = min(unmatched, key=lambda j: (weights[i, j], j))
        unmatched.remove(best)
        pairs.append((i, best))
    return pairs


def _eulerian_circuit(n: int, edges: list[tuple[int, int]], source: int) -> list[int]:
    """Hierholzer's algorithm on a multigraph given as an edge list."""
    incident: list[list[int]] = [[] for _ in range(n)]
    for idx, (a, b) in enumerate(edges):
        incident[a].append(idx)
        incident[b].append(idx)
    used = [False] * len(edges)
    circuit: list[int] = []
    stack = [source]
    while stack:
        v = stack[-1]
        while incident[v] and used[incident[v][-1]]:
            incident[v].pop()
        if not incident[v]:
            circuit.append(stack.pop())
        else:
            idx = incident[v].pop()
            used[idx] = True
            a, b = edges[idx]
            stack.append(b if a == v else a)
    return circuit[::-1]


def christofides(g: WeightedGraph) -> ChristofidesResult:
    """MST + odd-vertex matching + Eulerian shortcut. 1.5-approximation when
    the matching is exact (more than 18 odd vertices fall back to a greedy
    matching, reported via ``exact_matching``)."""
    _require_complete_metric(g)
    if g.n < 3:
        raise ValueError("christofides needs at least 3 nodes")
    mst = prim_mst_edges(g)
    degree = np.zeros(g.n, dtype=np.int64)
    for a, b in mst:
        degree[a] += 1
        degree[b] += 1
    odd = np.nonzero(degree % 2)[0]
    sub = g.weights[np.ix_(odd, odd)]
    exact = len(odd) <= MATCHING_EXACT_LIMIT
    pairs = min_weight_perfect_matching(sub) if exact else greedy_matching(sub)
    matching = [(int(odd[a]), int(odd[b])) for a, b in pairs]
    circuit = _eulerian_circuit(g.n, mst + matching, 0)
    seen = set()
    order = [v for v in circuit if not (v in seen or seen.add(v))]
    return ChristofidesResult(Tour(np.array(order)), exact)


# --- Held-Karp ----------------------------------------------------------------


def _popcounts(limit: int) -> np.ndarray:
    v = np.arange(limit, dtype=np.uint32)
    v = v - ((v >> 1) & 0x55555555)
    v = (v & 0x33333333) + ((v >> 2) & 0x33333333)
    v = (v + (v >> 4)) & 0x0F0F0F0F
    return ((v * 0x01010101) >> 24).astype(np.int64)


def held_karp(g: WeightedGraph, size_guard: int = HELD_KARP_DEFAULT_GUARD) -> tuple[float, Tour]:
    """Exact minimum tour by dynamic programming over vertex subsets.

    Memory/time grow as 2^n; instances above ``size_guard`` nodes are
    refused (the caller may widen the guard explicitly, ~1.6 GB at n=24).
    Missing edges count as infinite.
    """
    n = g.n
    if n > size_guard:
        raise SizeLimitError(f"held_karp guard: n={n} exceeds {size_guard}")
    if n < 3:
        raise ValueError("tours need at least 3 nodes")
    w = np.where(g.adj, g.weights, np.inf)
    m = n - 1  # bit b <-> node b+1; tours are rooted at node 0
    wsub = w[1:, 1:]
    dp = np.full((1 << m, m), np.inf)
    parent = np.full((1 << m, m), -1, dtype=np.int8)
    dp[1 << np.arange(m), np.arange(m)] = w[0, 1:]

    counts = _popcounts(1 << m)
    masks_by_size = [np.nonzero(counts == s)[0] for s in range(m + 1)]
    for s in range(1, m):
        masks = masks_by_size[s]
        for nxt in range(m):
            sel = masks[(masks >> nxt) & 1 == 0]
            if not len(sel):
                continue
            block = dp[sel] + wsub[:, nxt][None, :]
            best = np.argmin(block, axis=1)
            rows = np.arange(len(sel))
            dp[sel | (1 << nxt), nxt] = block[rows, best]
            parent[sel | (1 << nxt), nxt] = best

    full = (1 << m) - 1
    totals = dp[full] + w[1:, 0]
    end = int(np.argmin(totals))
    cost = float(totals[end])
    if not np.isfinite(cost):
        raise ValueError("graph admits no finite tour")

    order = [end + 1]
    mask = full
    while parent[mask, order[-1] - 1] >= 0:
        prev = int(parent[mask, order[-1] - 1])
        mask ^= 1 << (order[-1] - 1)
        order.append(prev + 1)
    order.append(0)
    tour = Tour(np.array(order[::-1]))
    return tour_cost(g, tour), tour


# --- vertex k-center ------------------------------------------------------------


def gon_farthest_first(g: WeightedGraph, k: int, first: int,
                       dists: np.ndarray | None = None) -> CenterSet:
    """Farthest-first traversal: k-1 times add the node farthest from the
    chosen centers (2-approximation); ties to lowest index."""
    if not 1 <= k <= g.n:
        raise ValueError("k must be in 1..n")
    if not 0 <= first < g.n:
        raise ValueError("first center out of range")
    d = apsp_matrix(g) if dists is None else dists
    centers = [first]
    nearest = d[:, first].copy()
    for _ in range(k - 1):
        nxt = int(np.argmax(nearest))
        centers.append(nxt)
        nearest = np.minimum(nearest, d[:, nxt])
    return CenterSet(tuple(centers))


def vkc_exact(g: WeightedGraph, k: int, max_n: int = 20,
              dists: np.ndarray | None = None) -> tuple[float, CenterSet]:
    """Optimal k-center objective and a witness set.

    The optimum is always one of the pairwise shortest-path distances, so we
    binary-search the sorted distinct distances; feasibility of a radius is
    decided by branch-and-bound over candidate centers with dominated
    candidates removed. Guarded to n <= ``max_n`` unless k <= 3.
    """
    if not 1 <= k <= g.n:
        raise ValueError("k must be in 1..n")
    if g.n > max_n and k > 3:
        raise SizeLimitError(f"vkc_exact guard: n={g.n} with k={k}")
    d = apsp_matrix(g) if dists is None else dists
    n = g.n
    radii = np.unique(d)

    def cover_sets(r: float) -> list[int]:
        within = d <= r
        return [int(np.sum(1 << np.nonzero(within[:, c])[0])) for c in range(n)]

    full = (1 << n) - 1

    def feasible(r: float) -> tuple[int, ...] | None:
        covers = cover_sets(r)
        keep = []
        for c in range(n):  # drop dominated candidates (keep the first of equals)
            dominated = any(
                covers[c] | covers[o] == covers[o] and (covers[c] != covers[o] or o < c)
                for o in keep
            )
            if not dominated:
                keep.append(c)

        def search(uncovered: int, chosen: tuple[int, ...]) -> tuple[int, ...] | None:
            if uncovered == 0:
                return chosen
            if len(chosen) == k:
                return None
            options = [c for c in keep if covers[c] & uncovered]
            # branch on the hardest-to-cover node
            v, v_opts = -1, None
            rest = uncovered
            while rest:
                node = (rest & -rest).bit_length() - 1
                opts = [c for c in options if covers[c] >> node & 1]
                if not opts:
                    return None
                if v_opts is None or len(opts) < len(v_opts):
                    v, v_opts = node, opts
                rest ^= 1 << node
            for c in v_opts:
                result = search(uncovered & ~covers[c], chosen + (c,))
                if result is not None:
                    return result
            return None

        return search(full, ())

    lo, hi = 0, len(radii) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        if feasible(float(radii[mid])) is not None:
            hi = mid
        else:
            lo = mid + 1
    witness = feasible(float(radii[lo]))
    if witness is None:
        raise RuntimeError("binary search lost feasibility")  # cannot happen: radius max(d)
    return float(radii[lo]), CenterSet(witness)
