"""Splittable counter-based seeding.

Every stochastic routine takes an explicit master seed and derives
per-stream generators as hash(master, *stream_labels), so Monte Carlo
runs are reproducible and shardable across workers without coordination.
"""

from __future__ import annotations

import hashlib
from typing import Iterable

import numpy as np


def _feed(h, part) -> None:
    if isinstance(part, str):
        h.update(b"s")
        h.update(part.encode("utf-8"))
    elif isinstance(part, (bytes, bytearray)):
        h.update(b"b")
        h.update(bytes(part))
    elif isinstance(part, (int, np.integer)):
        h.update(b"i")
        h.update(int(part).to_bytes(16, "big", signed=True))
    elif isinstance(part, Iterable):
        h.update(b"t")
        for item in part:
            _feed(h, item)
        h.update(b"e")
    else:
        raise TypeError(f"unsupported seed part {type(part)!r}")


def derive_seed(master_seed: int, *stream) -> int:
    """Deterministic 64-bit seed for the sub-stream labeled by ``stream``."""
    h = hashlib.blake2b(digest_size=8)
    _feed(h, master_seed)
    for part in stream:
        _feed(h, part)
    return int.from_bytes(h.digest(), "big")


def derive_rng(master_seed: int, *stream) -> np.random.Generator:
    """Generator for the sub-stream labeled by ``stream``."""
    return np.random.default_rng(derive_seed(master_seed, *stream))
