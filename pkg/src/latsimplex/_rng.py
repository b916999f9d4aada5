"""Seeded counter-based random streams.

Every random draw in the package goes through :func:`make_rng` so that a
single integer seed plus a small tuple of stream labels fully determines the
output, independent of call order elsewhere.
"""
import numpy as np

# stream labels
POWER_INIT = 1
GS_REFILL = 2
DIRECTION = 3
SPECTRAL = 4
WEIGHTS = 10
TOPICS = 11
DOCUMENTS = 12
EDGES = 13
NOISE = 14
HAUSDORFF = 20
KMEANS = 30


def make_rng(seed, *stream):
    """Return a Philox generator keyed by ``(seed, *stream)``."""
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence([seed, *(int(s) for s in stream)])
    return np.random.Generator(np.random.Philox(ss))
