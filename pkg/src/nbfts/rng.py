"""Seeded random streams.

Every sampler in the package takes a :class:`numpy.random.Generator`. An
:class:`RngHandle` names one such stream by ``(seed, stream_id)``; streams with
different ids are statistically independent (``SeedSequence`` spawn keys), and
the same pair always reproduces the same sequence.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class RngHandle:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        if not (0 <= self.seed <= _MASK64 and 0 <= self.stream_id <= _MASK64):
            raise ValueError("seed and stream_id must be unsigned 64-bit integers")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.PCG64(seq))

    def child(self, stream_id: int) -> "RngHandle":
        return RngHandle(self.seed, stream_id)


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an RngHandle or an int seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngHandle):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngHandle(int(rng)).generator()
    raise TypeError(f"cannot build a random generator from {type(rng).__name__}")


def derive_seed(seed: int, *keys: int) -> int:
    """A 63-bit seed for a labelled sub-task (e.g. one replication) of a run."""
    state = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in keys)).generate_state(2, np.uint32)
    return int((int(state[0]) << 31) ^ int(state[1])) & ((1 << 63) - 1)
