"""
Deterministic random streams

Every experiment derives its randomness from one 64-bit seed. Consumers never
share a generator: each asks the root for a named child stream (``data``,
``init``, ``noise``, ``eval``, ``audit``), so adding draws to one consumer
never shifts another consumer's sequence.

The bit generator is numpy's PCG64, seeded through ``SeedSequence`` with the
CRC-32 of the stream name as spawn key. PCG64 output is identical across
platforms for a given numpy release.
"""

import zlib
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import ConfigError

Shape = Union[int, Tuple[int, ...], None]

MAX_SEED = 2**64 - 1


class Rng:
    """
    Seeded random stream with named children

    Example:
        >>> rng = Rng(7)
        >>> noise = rng.stream("noise")
        >>> z = noise.normal((4, 16))
    """

    def __init__(self, seed: int, _key: Tuple[int, ...] = ()):
        if not 0 <= int(seed) <= MAX_SEED:
            raise ConfigError(f"Seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self._key = _key
        sequence = np.random.SeedSequence(self.seed, spawn_key=_key)
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def stream(self, name: str) -> "Rng":
        """Return the child stream called ``name`` (same name, same stream)"""
        return Rng(self.seed, self._key + (zlib.crc32(name.encode("utf-8")),))

    def normal(self, size: Shape = None) -> np.ndarray:
        return self.generator.standard_normal(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size: Shape = None) -> np.ndarray:
        return self.generator.uniform(low, high, size)

    def integers(self, low: int, high: int, size: Shape = None) -> np.ndarray:
        """Integers in the half-open range [low, high)"""
        return self.generator.integers(low, high, size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, stream={self._key})"


def as_rng(rng: Optional[Union["Rng", int]]) -> Rng:
    """Accept an Rng, a bare seed, or None (seed 0)"""
    if isinstance(rng, Rng):
        return rng
    return Rng(0 if rng is None else rng)
