"""Deterministic random streams built on the counter-based Philox generator.

Same seed gives an identical draw sequence across runs and platforms.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def _mix64(seed: int, salt: int) -> int:
    """splitmix64-style finalizer used to derive child seeds."""
    x = (seed + 0x9E3779B97F4A7C15 * (salt + 1)) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    x ^= x >> 31
    return x


class Rng:
    """A seeded Philox stream with convenience draws used across the stack."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.Philox(self.seed))

    def child(self, salt: int) -> "Rng":
        """Derive an independent stream; deterministic in (seed, salt)."""
        return Rng(_mix64(self.seed, int(salt)))

    def uniform(self, shape=None, low: float = 0.0, high: float = 1.0, dtype=np.float32):
        out = self._gen.uniform(low, high, size=shape)
        return out.astype(dtype) if shape is not None else float(out)

    def normal(self, shape=None, dtype=np.float32):
        out = self._gen.standard_normal(size=shape)
        return out.astype(dtype) if shape is not None else float(out)

    def gumbel(self, shape=None, dtype=np.float32):
        out = self._gen.gumbel(size=shape)
        return out.astype(dtype) if shape is not None else float(out)

    def integers(self, low: int, high: int | None = None, size=None):
        return self._gen.integers(low, high, size=size)

    def randint(self, n: int) -> int:
        return int(self._gen.integers(0, n))

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def shuffle(self, seq: list) -> list:
        order = self._gen.permutation(len(seq))
        return [seq[i] for i in order]

    def choice(self, seq, k: int = 1, replace: bool = False) -> list:
        idx = self._gen.choice(len(seq), size=k, replace=replace)
        return [seq[i] for i in idx]
