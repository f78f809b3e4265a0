"""Named, order-independent random substreams.

Every stochastic routine in the package draws from a substream derived from
one root seed plus a list of name/index labels.  Streams are independent of
the order in which they are created, so adding a building (or a whole module)
never perturbs the draws of existing ones.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, *labels) -> np.random.Generator:
    """Generator for the substream identified by ``labels`` under ``seed``.

    Labels may be strings or integers; strings are hashed with crc32 so the
    derivation is stable across runs and platforms.
    """
    entropy = [int(seed) & 0xFFFFFFFF]
    for label in labels:
        if isinstance(label, str):
            entropy.append(zlib.crc32(label.encode("utf-8")))
        else:
            entropy.append(int(label) & 0xFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(entropy))
