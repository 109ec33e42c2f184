"""Deterministic random streams.

Every document-, input- or timestep-local update draws from its own lane.  A
lane generator depends only on a per-sweep root drawn from the chain generator
and on the lane id, so results do not depend on scheduling or thread count.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np


def as_generator(seed_or_rng=None):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def chain_rng(seed, chain=0):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(chain,)))


def sweep_root(rng):
    """Draw the entropy that keys all lanes of one sweep."""
    return int(rng.integers(0, 2**63 - 1))


def lane_rng(root, lane):
    return np.random.default_rng(np.random.SeedSequence(root, spawn_key=(int(lane),)))


def lane_rngs(rng, lanes):
    root = sweep_root(rng)
    return [lane_rng(root, lane) for lane in lanes]


def num_threads():
    try:
        return max(1, int(os.environ.get("PGMULT_THREADS", "1")))
    except ValueError:
        return 1


def parallel_map(fn, *iterables):
    """``list(map(fn, ...))``, spread over ``PGMULT_THREADS`` worker threads."""
    n = num_threads()
    if n == 1:
        return list(map(fn, *iterables))
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, *iterables))
