"""Deterministic random-stream derivation.

Every stochastic component draws from its own ``numpy.random.Generator``
derived from a master seed plus a structured key, so that

* repetitions are independent by construction (no stream reuse),
* adding/removing strategies or metrics never perturbs other streams,
* any single repetition can be reproduced in isolation.
"""
from __future__ import annotations

import hashlib

import numpy as np

# Purpose tags keep strategy-facing draws and diagnostic draws on disjoint
# streams: recomputing a metric can never change a trajectory.
PURPOSE_STRATEGY = 0
PURPOSE_METRICS = 1
PURPOSE_INSTANCE = 2


def _key_words(label: str) -> list[int]:
    """Hash an arbitrary label into four stable 32-bit words."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return [int.from_bytes(digest[4 * i : 4 * i + 4], "little") for i in range(4)]


def child_seed_sequence(master_seed: int, label: str, rep: int, purpose: int) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(master_seed), *_key_words(label), int(rep), int(purpose)])


def strategy_stream(master_seed: int, label: str, rep: int) -> np.random.Generator:
    """Stream that drives a strategy's decisions for one repetition."""
    return np.random.Generator(np.random.PCG64(child_seed_sequence(master_seed, label, rep, PURPOSE_STRATEGY)))


def metrics_stream(master_seed: int, label: str, rep: int) -> np.random.Generator:
    """Stream for Monte Carlo diagnostics; never touches the trajectory."""
    return np.random.Generator(np.random.PCG64(child_seed_sequence(master_seed, label, rep, PURPOSE_METRICS)))


def instance_stream(master_seed: int, label: str) -> np.random.Generator:
    """Stream for randomized instance generation (shared across repetitions)."""
    return np.random.Generator(np.random.PCG64(child_seed_sequence(master_seed, label, 0, PURPOSE_INSTANCE)))
