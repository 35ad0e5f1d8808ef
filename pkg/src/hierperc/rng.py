"""Counter-based splittable random streams.

Every stochastic routine in the package draws from a Philox generator keyed by
(seed, *path), where the path is a tuple of small non-negative integers naming
the consumer (stream kind, replica chunk, scale, ...).  Distinct paths give
statistically independent streams, and any stream can be reconstructed in
isolation, so results are reproducible regardless of execution order or worker
count.
"""

from __future__ import annotations

import os

import numpy as np

# stable stream-kind identifiers; never renumber, only append
KIND_FOREST = 1
KIND_SIZES = 2
KIND_GILLESPIE = 3
KIND_FINAL = 4
KIND_RENORM = 5
KIND_BOOTSTRAP = 6
KIND_TWOPOINT = 7
KIND_PICKS = 8

DEFAULT_SEED_ENV = "HIERPERC_SEED"


def stream(seed: int, *path: int) -> np.random.Generator:
    """Return the Philox generator for a (seed, *path) key."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def default_seed() -> int:
    """Seed from the HIERPERC_SEED environment variable, else 0."""
    raw = os.environ.get(DEFAULT_SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise ValueError(f"{DEFAULT_SEED_ENV} must be an integer, got {raw!r}") from exc
