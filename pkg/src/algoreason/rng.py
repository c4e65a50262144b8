"""Seeded random streams that can be split into independent named substreams.

A fixed seed gives a bit-identical stream of draws, and ``split`` derives a
new independent stream from a label, so e.g. data generation and weight
initialization never share state even when driven by one experiment seed.
"""

import hashlib

import numpy as np


def _derive_seed(seed: int, label: str) -> int:
    digest = hashlib.sha256(f"{seed}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


class Rng:
    """Deterministic random generator keyed by a 64-bit seed."""

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.gen = np.random.Generator(np.random.PCG64(self.seed))

    def split(self, label: str) -> "Rng":
        """Independent substream derived from (seed, label)."""
        return Rng(_derive_seed(self.seed, label))

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.gen.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def permutation(self, n: int):
        return self.gen.permutation(n)

    def shuffle(self, x) -> None:
        self.gen.shuffle(x)

    def choice(self, a, size=None, replace=True):
        return self.gen.choice(a, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed})"
