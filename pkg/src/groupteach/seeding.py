"""Named random streams.

Streams are addressed by names rather than by draw order, so two runs that
differ in one place (a team member's profile, an extra study cell) still
share every other draw.
"""
from __future__ import annotations

import zlib

import numpy as np


def key(name) -> int:
    if isinstance(name, str):
        return zlib.crc32(name.encode())
    return int(name)


def seed_sequence(seed=None, *names) -> np.random.SeedSequence:
    """A SeedSequence for ``names`` under ``seed`` (int, SeedSequence or None)."""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=(*seed.spawn_key, *map(key, names)))
    return np.random.SeedSequence(seed, spawn_key=tuple(map(key, names)))


def stream(seed, *names) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, *names))


class EventStreams:
    """One fresh generator per (kind, occurrence) under a root seed."""

    def __init__(self, seed=None, *names):
        self.root = seed_sequence(seed, *names)
        self.counts: dict[str, int] = {}

    def next(self, kind: str) -> np.random.Generator:
        n = self.counts.get(kind, 0)
        self.counts[kind] = n + 1
        return stream(self.root, kind, n)
