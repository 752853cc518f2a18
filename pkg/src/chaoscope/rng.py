"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(master_seed, *keys)`` through
``numpy.random.SeedSequence``'s spawn key, so the stream for a given key is
reproducible regardless of which other streams were drawn before it.
"""

import numpy as np

# component ids used in spawn keys
LAYER = 0
REPLICA = 1
W_FIELD = 2
Z_FIELD = 3
ATOMS = 4
BLOCK = 5
KAHANE = 6


def stream(seed, *keys):
    """Return an independent generator for ``seed`` and the integer ``keys``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
