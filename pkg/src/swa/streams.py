"""Deterministic random substreams.

Every stochastic stage derives its generator from (seed, stream tag, index),
so any single task can be replayed in isolation and results never depend on
scheduling.  Tags keep the namespaces of the different stages disjoint.
"""

from __future__ import annotations

import numpy as np

SUBSAMPLE_STREAM = 1  # column draws inside one selection run
TRIAL_STREAM = 2      # per-trial data + engine seeds in the simulation lab
GRID_STREAM = 3       # per-s sub-seeds for tuning / multi-s runs
SCENARIO_STREAM = 4   # dataset draws from a scenario


def substream(seed: int, tag: int, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tag), int(index)))
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(seed: int, tag: int, index: int) -> int:
    """A 64-bit sub-seed for nesting one seeded stage inside another."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tag), int(index)))
    return int(ss.generate_state(1, np.uint64)[0])


def child_seeds(seed: int, tag: int, index: int, count: int) -> list[int]:
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(tag), int(index)))
    return [int(v) for v in ss.generate_state(count, np.uint64)]
