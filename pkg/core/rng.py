# core/rng.py
"""
Counter-based random streams. Every stream is keyed by the run seed plus a
tag and indices, so results do not depend on call order or scheduling.
"""
import hashlib
from typing import Union

import numpy as np

Key = Union[str, int]


def stream_key(*parts: Key) -> int:
    digest = hashlib.sha256("\x1f".join(str(p) for p in parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:16], "little")


def derive_rng(run_seed: int, *parts: Key) -> np.random.Generator:
    """A Philox generator keyed by (run_seed, *parts)."""
    key = stream_key(run_seed, *parts)
    return np.random.Generator(np.random.Philox(key=key))


def choice_index(rng: np.random.Generator, weights) -> int:
    """Draws an index proportional to nonnegative weights (all-zero weights fall back to uniform)."""
    w = np.asarray(weights, dtype=float)
    total = w.sum()
    if total <= 0:
        return int(rng.integers(len(w)))
    cumulative = np.cumsum(w / total)
    index = int(np.searchsorted(cumulative, rng.random(), side="right"))
    return min(index, len(w) - 1)
