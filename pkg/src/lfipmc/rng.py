"""Deterministic random substreams derived from one master seed.

Every stochastic operation in the package draws from a generator produced
by :func:`substream`, keyed by small non-negative integers such as
``(iteration, particle_index, purpose)``. Streams are independent of each
other and of execution order, so threaded runs reproduce serial ones bit
for bit.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1

# Stable purpose codes; string keys in substream() are looked up here.
PURPOSES = {
    "init": 0,
    "resample": 1,
    "perturb": 2,
    "simulate": 3,
    "marginal": 4,
    "observation": 5,
    "particles": 6,
    "attempt": 7,
}


def _key_words(master_seed: int, key) -> list[int]:
    words = [int(master_seed) & _MASK64]
    for part in key:
        if isinstance(part, str):
            part = PURPOSES[part]
        part = int(part)
        if part < 0:
            raise ValueError("substream key parts must be non-negative")
        words.append(part)
    return words


def substream(master_seed: int, *key) -> np.random.Generator:
    """Return an independent generator for ``(master_seed, *key)``.

    Key parts may be non-negative integers or purpose names from
    :data:`PURPOSES`. The same key always yields the same stream.
    """
    return np.random.default_rng(np.random.SeedSequence(_key_words(master_seed, key)))


def child_seed(master_seed: int, *key) -> int:
    """Derive a 64-bit master seed for a nested run, keyed like a substream."""
    state = np.random.SeedSequence(_key_words(master_seed, key)).generate_state(2)
    return int(state[0]) | (int(state[1]) << 32)
