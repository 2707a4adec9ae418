"""
Seeded random streams

Every (seed, purpose, index) triple maps to its own counter-based Philox
generator, so results do not depend on how work is split across threads.
"""

import numpy as np


def make_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for a seed and a path of integer keys"""
    entropy = [int(seed)] + [int(k) for k in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


# Stream purposes
STREAM_TRAIN = 1
STREAM_EVAL = 2
STREAM_GENERATE = 3
STREAM_INIT = 4
STREAM_ORACLE = 5
STREAM_SAMPLE_OBS = 6
