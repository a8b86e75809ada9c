"""Deterministic stream derivation for reproducible parallel replicates."""
from __future__ import annotations

import numpy as np

# Stream namespaces; (seed, namespace, *indices) fully determines a stream.
BURNIN = 101
MARKS = 102
EQUILIBRIUM = 103
TAU = 104
TRACE = 105
CHAIN = 106
DENSITY = 107
VERIFY = 108


def substream(seed: int, *path: int) -> np.random.Generator:
    """Independent generator derived from (seed, *path)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, path)]))
