"""Seedable, splittable random-number streams.

Every stochastic routine in this package consumes a ``numpy.random.Generator``.
:class:`RngStream` is the seeding front door: a (seed, stream_id) pair that
maps deterministically onto a PCG64 generator, so identical pairs reproduce
bit-identical draw sequences and distinct stream ids give statistically
independent streams.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    """One round of the splitmix64 bijection; spreads child ids apart."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


@dataclass(frozen=True)
class RngStream:
    """A reproducible random stream identified by (seed, stream_id)."""

    seed: int
    stream_id: int = 0

    def __post_init__(self) -> None:
        if not 0 <= int(self.seed) < (1 << 64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if int(self.stream_id) < 0:
            raise ValueError("stream_id must be nonnegative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, index: int) -> "RngStream":
        """Derive an independent substream (index >= 0).

        Child ids are mixed through splitmix64 so trees of substreams
        (replications, chains, restarts) never collide in practice.
        """
        if index < 0:
            raise ValueError("child index must be nonnegative")
        mixed = _splitmix64((int(self.stream_id) << 1) ^ _splitmix64(index + 1))
        return RngStream(self.seed, mixed)

    def children(self, n: int) -> list["RngStream"]:
        return [self.child(i) for i in range(n)]


def as_generator(rng: "RngStream | np.random.Generator") -> np.random.Generator:
    """Accept either an RngStream or an already-built Generator."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")
