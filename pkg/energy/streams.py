"""
Named random streams.

One run seed fans out to independent numpy Generators per purpose
("process", "nn_init", "shuffle", "improve", ...) and per work item, so
changing how many draws one component makes never shifts another.
"""
import zlib

import numpy as np


def _name_key(name):
    # crc32 is stable across interpreter runs, unlike hash()
    return zlib.crc32(name.encode("utf-8"))


def derive(seed, name, *indices):
    """Return a Generator for (seed, name, indices)."""
    spawn_key = (_name_key(name),) + tuple(int(i) for i in indices)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=spawn_key))


class Streams:
    """Factory bound to one run seed."""

    def __init__(self, seed):
        self.seed = int(seed)

    def get(self, name, *indices):
        return derive(self.seed, name, *indices)

    def __repr__(self):
        return f"Streams(seed={self.seed})"
