"""Deterministic random substreams.

Every stochastic step draws from its own ``numpy.random.Generator`` whose seed
is mixed from the master seed and a tuple of labels::

    SeedSequence([master_seed, crc32(purpose), crc32(network_id), replication])

``crc32`` is used instead of ``hash()`` because string hashing is salted per
process.  Because the seed depends only on the labels, results do not depend
on the order in which substreams are created or on which thread creates them.
"""

from __future__ import annotations

import zlib

import numpy as np


def _label_word(label: str | int) -> int:
    if isinstance(label, (int, np.integer)):
        if label < 0:
            raise ValueError(f"substream label must be non-negative, got {label}")
        return int(label)
    return zlib.crc32(str(label).encode("utf-8"))


def substream_seed(master_seed: int, *labels: str | int) -> np.random.SeedSequence:
    if master_seed < 0:
        raise ValueError(f"master seed must be non-negative, got {master_seed}")
    return np.random.SeedSequence([int(master_seed), *(_label_word(x) for x in labels)])


def substream(master_seed: int, *labels: str | int) -> np.random.Generator:
    """Return an independent generator for ``(master_seed, *labels)``."""
    return np.random.Generator(np.random.PCG64(substream_seed(master_seed, *labels)))
