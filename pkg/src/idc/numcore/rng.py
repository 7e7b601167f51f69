"""Seeded random streams on the counter-based Philox generator."""

from __future__ import annotations

import numpy as np

ALGORITHM = "philox4x64"


class Rng:
    """Reproducible source of the noise the models consume.

    Streams are a pure function of the seed on every platform numpy supports.
    ``spawn(key)`` derives an independent child stream, so adding draws in one
    component never shifts another component's noise.
    """

    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.key = tuple(key)
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        self._gen = np.random.Generator(np.random.Philox(ss))

    @property
    def algorithm(self) -> str:
        return ALGORITHM

    @property
    def generator(self) -> np.random.Generator:
        return self._gen

    def spawn(self, key: int) -> "Rng":
        return Rng(self.seed, self.key + (int(key),))

    def normal(self, size, loc: float = 0.0, scale: float = 1.0) -> np.ndarray:
        return self._gen.normal(loc, scale, size=size)

    def uniform(self, size, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self._gen.uniform(low, high, size=size)

    def gumbel(self, size) -> np.ndarray:
        # -log(-log U) with U kept away from {0, 1}
        u = self._gen.uniform(np.finfo(float).tiny, 1.0, size=size)
        return -np.log(-np.log(u))

    def bernoulli(self, p: float, size) -> np.ndarray:
        return (self._gen.random(size) < p).astype(np.float64)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def integers(self, low, high=None, size=None):
        return self._gen.integers(low, high, size=size)

    def choice(self, n: int, p=None):
        return int(self._gen.choice(n, p=p))
