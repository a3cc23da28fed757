"""Seeded, addressable random streams.

A stream is addressed by an integer path rooted at a master seed.
Distinct paths yield statistically independent generators no matter in
which order the streams are created, so ensemble members, time steps,
and instance-generation stages never share randomness and every result
is reproducible bit for bit from ``(seed, path)``.
"""

from __future__ import annotations

import numpy as np

__all__ = ["stream", "derive_seed"]


def stream(seed: int, *path: int) -> np.random.Generator:
    """Generator for the stream addressed by ``path`` under ``seed``."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    return np.random.default_rng(ss)


def derive_seed(seed: int, *path: int) -> int:
    """A 64-bit integer seed derived from ``(seed, path)``.

    Use this when a child component wants to build its own stream tree.
    """
    ss = np.random.SeedSequence(entropy=seed, spawn_key=tuple(path))
    lo, hi = ss.generate_state(2)
    return int(lo) | (int(hi) << 32)
