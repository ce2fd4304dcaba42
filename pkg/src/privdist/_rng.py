"""Seeding helpers built on numpy's counter-based Philox generator.

Every sampling routine in the package is a pure function of its inputs and a
seed; trials derive independent streams from (master seed, trial indices) so
batches can run in any order, serial or parallel, with identical results.
"""

from __future__ import annotations

from typing import Union

import numpy as np

SeedLike = Union[int, np.random.SeedSequence, np.random.Generator]


def as_generator(seed: SeedLike) -> np.random.Generator:
    """Return a Philox-backed Generator; pass existing Generators through."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def trial_rng(master_seed: int, *indices: int) -> np.random.Generator:
    """Independent stream for one trial, keyed by (master seed, indices)."""
    ss = np.random.SeedSequence(
        entropy=int(master_seed), spawn_key=tuple(int(i) for i in indices)
    )
    return np.random.Generator(np.random.Philox(ss))
