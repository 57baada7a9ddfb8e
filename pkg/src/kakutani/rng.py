"""Reproducible uniform streams.

Every stream is a PCG64 generator keyed by ``SeedSequence(seed, spawn_key=(stream_index,))``,
so one master seed fans out into independent per-replication streams and the same
``(seed, stream_index)`` pair always replays the same uniforms bit for bit.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError

DEFAULT_SEED = 19730401


class RandomStream:
    """A seeded stream of Unif(0,1) draws with a draw counter.

    ``counter`` counts raw 53-bit draws taken from the underlying generator,
    including the (probability 2**-53) rejections of an exact zero.
    """

    def __init__(self, seed: int = DEFAULT_SEED, stream_index: int = 0):
        if not (0 <= int(seed) < 2**64):
            raise ConfigError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if int(stream_index) < 0:
            raise ConfigError(f"stream_index must be >= 0, got {stream_index}")
        self.seed = int(seed)
        self.stream_index = int(stream_index)
        self.counter = 0
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index,))
        self._gen = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self) -> str:
        return (f"RandomStream(seed={self.seed}, stream_index={self.stream_index}, "
                f"counter={self.counter})")

    @property
    def generator(self) -> np.random.Generator:
        """The underlying generator; compiled kernels draw from it directly."""
        return self._gen

    def uniform(self) -> float:
        u = self._gen.random()
        self.counter += 1
        while u == 0.0:
            u = self._gen.random()
            self.counter += 1
        return float(u)

    def uniforms(self, size: int) -> np.ndarray:
        out = self._gen.random(size)
        self.counter += size
        zeros = np.flatnonzero(out == 0.0)
        for i in zeros:
            out[i] = self.uniform()
        return out

    def advance_counter(self, draws: int) -> None:
        """Record draws consumed by a kernel that used :attr:`generator`."""
        self.counter += int(draws)

    def spawn(self, stream_index: int) -> "RandomStream":
        """A fresh stream sharing this seed but with another index."""
        return RandomStream(self.seed, stream_index)


def as_stream(rng) -> RandomStream:
    """Accept a RandomStream, an int seed, or None (default seed)."""
    if isinstance(rng, RandomStream):
        return rng
    if rng is None:
        return RandomStream(DEFAULT_SEED)
    if isinstance(rng, (int, np.integer)):
        return RandomStream(int(rng))
    raise TypeError(f"expected RandomStream or int seed, got {type(rng).__name__}")
