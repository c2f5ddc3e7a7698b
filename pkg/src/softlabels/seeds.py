"""Deterministic RNG derivation: one user seed, independent named streams.

Every random consumer in the package draws from ``rng_for(seed, *stream)``
with a fixed stream tag, so a single CLI seed reproduces the whole run while
components (data generation, splitting, parameter init, shuffling) stay
decoupled. Stream tags in use: 0 = synthetic data, 1 = split, 2 = model
parameters, 3 = minibatch shuffling.
"""

import numpy as np


def rng_for(seed, *stream):
    return np.random.default_rng(np.random.SeedSequence([int(seed), *(int(s) for s in stream)]))
