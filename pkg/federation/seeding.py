"""Random streams keyed by (root seed, purpose, round, cohort, client).

Keying every stream by position instead of drawing from one shared generator
keeps results independent of execution order and of skipped rounds.
"""

import numpy as np

SAMPLE = 0
NOISE = 1
CLIENT = 2


def stream(root_seed, purpose, *keys):
    seq = np.random.SeedSequence(int(root_seed), spawn_key=(int(purpose), *(int(k) for k in keys)))
    return np.random.default_rng(seq)
