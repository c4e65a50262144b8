"""Generate problem instances and compare heuristics against exact oracles.

Run from the repository root:  python3 demos/01_graphs_and_oracles.py
"""

import numpy as np

from algoreason.co_tasks import relative_error, tour_cost, vkc_objective
from algoreason.graphs import apsp_matrix, gen_er_connected, gen_euclidean_complete
from algoreason.rng import Rng
from algoreason.solvers import (
    beam_weight_tour,
    christofides,
    gon_farthest_first,
    greedy_nn_tour,
    held_karp,
    vkc_exact,
)

rng = Rng(2024)

print("=== Euclidean TSP instances ===")
print(f"{'n':>3} {'optimal':>9} {'greedy':>8} {'beam128':>8} {'christof':>9}")
for n in (8, 10, 12, 14):
    g = gen_euclidean_complete(n, rng)
    opt, _ = held_karp(g)
    greedy = tour_cost(g, greedy_nn_tour(g, 0))
    beam = tour_cost(g, beam_weight_tour(g, 0, 128))
    chris = tour_cost(g, christofides(g).tour)
    print(f"{n:>3} {opt:>9.4f} "
          f"{relative_error(greedy, opt):>7.1%} "
          f"{relative_error(beam, opt):>7.1%} "
          f"{relative_error(chris, opt):>8.1%}")

print()
print("=== Vertex k-center on sparse random graphs (k=3) ===")
print(f"{'n':>3} {'optimal':>9} {'farthest-first':>15}")
for n in (10, 14, 18):
    g = gen_er_connected(n, 0.5, rng)
    opt, centers = vkc_exact(g, 3)
    ff = vkc_objective(g, gon_farthest_first(g, 3, first=0))
    print(f"{n:>3} {opt:>9.4f} {relative_error(ff, opt):>14.1%}")

print()
print("=== Shortest-path structure ===")
g = gen_er_connected(10, 0.4, rng)
d = apsp_matrix(g)
print(f"graph with {g.num_edges()} edges; apsp diameter = {d.max():.4f}")
print(f"direct edges vs shortest paths: shortcuts on "
      f"{int((d[g.adj] < g.weights[g.adj]).sum() // 2)} of {g.num_edges()} edges")
