"""Counter-derived random streams: one independent generator per (seed, index)."""
import numpy as np

GENERATOR_NAME = "numpy.Philox(SeedSequence([seed, trial]))"


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(index)])))
