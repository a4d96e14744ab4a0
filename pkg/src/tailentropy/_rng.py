"""Seeding helpers.

All randomness goes through Philox (counter-based) generators. Replicate
streams are keyed by ``(base_seed, r)`` through ``SeedSequence`` spawn keys,
so replicate ``r`` never depends on how many replicates were requested or
on the order in which they are evaluated.
"""
import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed))))


def derive_seed(base_seed: int, r: int) -> int:
    """Deterministic 64-bit seed for replicate ``r`` of ``base_seed``."""
    ss = np.random.SeedSequence(int(base_seed), spawn_key=(int(r),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])
