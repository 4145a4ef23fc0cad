"""Deterministic random-stream derivation.

Seeding rule: every stream is a PCG64 generator seeded through
``numpy.random.SeedSequence``. Per-block streams mix the block's type pair
into the entropy as ``SeedSequence([master_seed, type_a, type_b])``, so a
block's draw sequence depends only on the master seed and the pair, never
on how many other blocks exist or in which order they are generated.
"""
from __future__ import annotations

import numpy as np

# Opaque deterministic stream; supports uniform and standard-normal draws.
RngStream = np.random.Generator


def master_stream(seed: int) -> RngStream:
    """Stream derived from the master seed alone."""
    return np.random.default_rng(np.random.SeedSequence(_check_seed(seed)))


def block_stream(seed: int, type_a: int, type_b: int) -> RngStream:
    """Independent stream for one block pair, stable across block subsets."""
    return np.random.default_rng(
        np.random.SeedSequence([_check_seed(seed), int(type_a), int(type_b)])
    )


def _check_seed(seed: int) -> int:
    from .errors import ValidationError

    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ValidationError(f"seed must be a nonnegative integer, got {seed!r}")
    return int(seed)
