"""Deterministic, splittable random streams.

Every stochastic component draws from a counter-based Philox stream
addressed by ``(seed, path)`` where ``path`` is a tuple of small
non-negative integers.  Distinct paths give statistically independent
streams, and a stream's values never depend on how much any other stream
consumed.  Parallel and serial execution over different paths therefore
produce bit-identical results.

Consumers that draw several logically separate blocks from one stream
(e.g. one block per detection) must use a fixed-width draw layout so each
block stays a pure function of the stream address and its block position.
"""
from __future__ import annotations

import numpy as np


class Stream:
    """An addressable random stream: a seed plus a path of integers."""

    __slots__ = ("seed", "path")

    def __init__(self, seed: int, path: tuple[int, ...] = ()):
        self.seed = int(seed)
        self.path = path

    def child(self, *path: int) -> "Stream":
        """Derive a sub-stream by extending the path."""
        return Stream(self.seed, self.path + path)

    def generator(self) -> np.random.Generator:
        """Materialize the numpy generator for this address."""
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))

    def __repr__(self) -> str:  # pragma: no cover
        return f"Stream(seed={self.seed}, path={self.path})"


def generator(seed: int, *path: int) -> np.random.Generator:
    """Shorthand for ``Stream(seed, path).generator()``."""
    return Stream(seed, path).generator()
