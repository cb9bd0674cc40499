"""Seedable random streams.

Every stream is a Philox-4x64-10 counter-based generator whose 128-bit key is
the pair ``(seed, stream)`` and whose counter starts at zero. The key is used
verbatim (no seed hashing), so a given pair yields the same sequence of
doubles on every platform numpy supports.
"""

from __future__ import annotations

import numpy as np

_U64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _U64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _U64
    return x ^ (x >> 31)


class RngStream:
    """A reproducible stream of uniforms keyed by ``(seed, stream)``.

    Streams are stateful; hand one to a single consumer at a time.
    """

    def __init__(self, seed: int, stream: int = 0):
        for name, value in (("seed", seed), ("stream", stream)):
            if not 0 <= int(value) <= _U64:
                raise ValueError(f"{name} must fit in an unsigned 64-bit integer, got {value}")
        self.seed = int(seed)
        self.stream = int(stream)
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream={self.stream})"

    @classmethod
    def for_task(cls, seed: int, ordinal: int) -> RngStream:
        """Stream for the ``ordinal``-th sub-task of a run seeded with ``seed``."""
        return cls(seed, ordinal)

    def substream(self, role: int) -> RngStream:
        """Stateless child stream for a fixed role inside one task.

        The child index is ``splitmix64(stream ^ splitmix64(role))``, so it does
        not depend on how much of this stream has been consumed.
        """
        return RngStream(self.seed, _splitmix64(self.stream ^ _splitmix64(role)))

    def spawn(self) -> RngStream:
        """Fresh child stream whose index is drawn from this stream."""
        index = int(self.generator.integers(0, _U64, dtype=np.uint64, endpoint=True))
        return RngStream(self.seed, index)

    def random(self) -> float:
        return float(self.generator.random())

    def uniforms(self, shape) -> np.ndarray:
        return self.generator.random(shape)
