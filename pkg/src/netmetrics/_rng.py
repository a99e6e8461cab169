"""Named random streams: one independent generator per (seed, purpose)."""

from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int | None, purpose: str, *keys: int) -> np.random.Generator:
    """Generator keyed by ``seed``, a purpose tag and optional integer keys.

    Keys let parallel workers draw from disjoint substreams, so the draws do not
    depend on how the work is scheduled.
    """
    entropy = [0 if seed is None else int(seed), zlib.crc32(purpose.encode()), *[int(k) for k in keys]]
    return np.random.default_rng(np.random.SeedSequence(entropy))
