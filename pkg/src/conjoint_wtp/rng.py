"""Deterministic RNG substreams.

All randomness in a run flows from one top-level seed. Independent units of
work (respondents, sampler chains, posterior draws in the market simulation)
each get their own generator keyed by (seed, stream tag, unit index), so
results do not depend on execution order and parallel execution is
bit-identical to serial.
"""

from __future__ import annotations

import numpy as np

from .errors import ContractError

# Stream tags. Never renumber: they are part of the reproducibility contract.
RESPONDENT_STREAM = 1
TASK_STREAM = 2
CHOICE_STREAM = 3
CHAIN_STREAM = 4
MARKET_STREAM = 5


def substream(seed: int, *path: int) -> np.random.Generator:
    """Generator for the substream identified by (seed, *path)."""
    if seed < 0:
        raise ContractError(f"seed must be non-negative, got {seed}")
    key = tuple(int(p) for p in path)
    if any(p < 0 for p in key):
        raise ContractError(f"stream path must be non-negative, got {key}")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=int(seed), spawn_key=key)))
