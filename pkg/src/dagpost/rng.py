"""Random streams: counter-based Philox generators, split through SeedSequence."""

import numpy as np

RNG_ALGORITHM = "numpy.Philox"


def make_rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn(seed, count):
    """``count`` independent streams derived from one seed."""
    return [np.random.Generator(np.random.Philox(s))
            for s in np.random.SeedSequence(seed).spawn(count)]
