"""Seeded random substreams.

Every consumer gets its own generator spawned from the run seed with a
fixed spawn key, so node i sees the same arrival sequence under either
engine and adding draws in one place never shifts another stream.
"""

import numpy as np

from ..params import NS_PER_S

ARRIVALS = 0
BACKOFF = 1

NEVER = np.iinfo(np.int64).max


def substream(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


class PoissonArrivals:
    """Arrival epochs (ns) of one Poisson source, drawn in batches."""

    __slots__ = ("_rng", "_scale", "_t", "_buf", "_pos", "_batch")

    def __init__(self, rate: float, rng: np.random.Generator, batch: int = 512):
        self._rng = rng
        self._scale = 1.0 / rate if rate > 0 else None
        self._t = 0.0
        self._buf = []
        self._pos = 0
        self._batch = batch

    def next(self) -> int:
        if self._scale is None:
            return NEVER
        if self._pos == len(self._buf):
            gaps = self._rng.exponential(self._scale, self._batch)
            times = self._t + np.cumsum(gaps)
            self._t = float(times[-1])
            self._buf = np.rint(times * NS_PER_S).astype(np.int64).tolist()
            self._pos = 0
        t = self._buf[self._pos]
        self._pos += 1
        return t
