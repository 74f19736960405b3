from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np


@dataclass
class RngStream:
    """Counter-based random stream.

    Each draw builds a fresh PCG64 generator from ``(seed, counter)`` and then
    bumps the counter, so a stream can be checkpointed as two integers and
    replays identically on any platform.
    """

    seed: int
    counter: int = 0

    def generator(self) -> np.random.Generator:
        gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed & 0xFFFFFFFFFFFFFFFF, self.counter])))
        self.counter += 1
        return gen

    def uniform(self, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        return self.generator().uniform(low, high, size=shape)

    def normal(self, shape, scale: float = 1.0) -> np.ndarray:
        return self.generator().normal(0.0, scale, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator().permutation(n)

    def child(self, label: str) -> "RngStream":
        """Independent stream derived from this one and a string label."""
        return RngStream((self.seed * 1_000_003 + zlib.crc32(label.encode())) & 0xFFFFFFFFFFFFFFFF)
