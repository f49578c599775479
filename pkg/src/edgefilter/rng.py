"""Seed splitting.

Each consumer of randomness owns a fixed stream index, so that adding a new
consumer never shifts the numbers drawn by the existing ones.
"""

from __future__ import annotations

import enum

import numpy as np


class Stream(enum.IntEnum):
    INIT = 0
    SHUFFLE = 1
    DROPOUT = 2
    SYNTHETIC = 3


def generator(seed: int, stream: Stream, *sub: int) -> np.random.Generator:
    if seed is None or int(seed) < 0:
        raise ValueError("seed must be a non-negative integer")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), *map(int, sub)))
    return np.random.Generator(np.random.PCG64(ss))
