"""Record classical algorithm executions as supervised trajectories.

Shows the (inputs, timed hints, outputs) structure that the reasoner is
trained on.  Run:  python3 demos/02_algorithm_trajectories.py
"""

import numpy as np

from algoreason.algorithms import decode_sorted_order, traj_bellman_ford, traj_insertion_sort, traj_mst_prim
from algoreason.graphs import gen_euclidean_complete
from algoreason.rng import Rng

rng = Rng(7)
g = gen_euclidean_complete(6, rng)

print("=== Bellman-Ford from node 0 ===")
traj = traj_bellman_ford(g, 0)
print(f"n={traj.n}, T={traj.T} relaxation snapshots")
for t in range(traj.T):
    d = traj.get("dist")[t]
    print(f"  t={t}: distances {np.array2string(d, precision=3)}")
print(f"output pointers: {traj.get('pi_out')}")

print()
print("=== Prim's algorithm ===")
traj = traj_mst_prim(g, 0)
in_tree = traj.get("in_tree")
added = traj.get("added")
print(f"T={traj.T} (one node per step)")
print(f"addition order: {[int(np.argmax(added[t])) for t in range(traj.T)]}")
print(f"tree parents:   {traj.get('parent_out')}")
weight = sum(g.weights[int(p), i] for i, p in enumerate(traj.get("parent_out")) if i != 0)
print(f"MST weight:     {weight:.4f}")

print()
print("=== Insertion sort as pointer rewiring ===")
values = rng.uniform(0, 1, 6)
traj = traj_insertion_sort(values)
print(f"values: {np.array2string(values, precision=3)}")
for t in (0, traj.T // 2, traj.T - 1):
    order = decode_sorted_order(traj.get("pred")[t])
    print(f"  after inserting element {t}: sequence {order}")
print(f"sorted order: {decode_sorted_order(traj.get('pred_out'))}")
