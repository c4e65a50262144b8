"""Neural execution of classical algorithms, transferred to hard graph optimization.

Library layout:

- ``rng``, ``graphs``: seeded instance generation and graph utilities
- ``features``, ``algorithms``: execution trajectories (inputs, hints, outputs)
- ``autodiff``, ``losses``, ``optim``: the reverse-mode tensor core
- ``model``: gated message-passing processor with per-task heads
- ``training``, ``transfer``: pre-training and the four transfer regimes
- ``co_tasks``, ``solvers``: tour/center decoding, heuristics, exact oracles
- ``harness``, ``cli``: reproducible experiment pipeline
"""

from .rng import Rng
from .graphs import (
    WeightedGraph,
    apsp_matrix,
    gen_er_connected,
    gen_euclidean_complete,
    is_connected,
)

__all__ = [
    "Rng",
    "WeightedGraph",
    "apsp_matrix",
    "gen_er_connected",
    "gen_euclidean_complete",
    "is_connected",
]
