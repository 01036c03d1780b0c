"""Helpers for turning seeds of various flavors into numpy Generators.

Every stochastic routine in this package accepts either an integer seed, a
``SeedSequence`` or a ready ``Generator``, so callers can run counter-based
streams (build a ``SeedSequence`` from a tuple of integers) without the
callee caring.
"""

from __future__ import annotations

import numpy as np

SeedLike = "int | np.random.SeedSequence | np.random.Generator"


def as_generator(seed) -> np.random.Generator:
    """Coerce an int / SeedSequence / Generator into a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.default_rng(seed)
    return np.random.default_rng(int(seed))


def stream(*entropy: int) -> np.random.Generator:
    """Deterministic generator keyed by a tuple of integers.

    Used for counter-based randomness: the stream for e.g.
    ``(run_seed, iteration, slot, purpose)`` is independent of which worker
    draws from it, so results cannot depend on thread scheduling.
    """
    return np.random.default_rng(np.random.SeedSequence(list(entropy)))
