"""Keyed counter-based random streams.

Every (master_seed, case_id, transform_index) triple maps to its own Philox
stream, so draws never depend on execution order or thread count.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["case_key", "stream", "subkey_stream"]

_MASK64 = (1 << 64) - 1


def case_key(case_id) -> int:
    """Stable 64-bit key for a case identifier (str or int)."""
    digest = hashlib.sha256(str(case_id).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def stream(master_seed: int, case_id, transform_index: int) -> np.random.Generator:
    seq = np.random.SeedSequence([int(master_seed) & _MASK64, case_key(case_id), int(transform_index)])
    return np.random.Generator(np.random.Philox(seq))


def subkey_stream(key: int, *extra: int) -> np.random.Generator:
    """Stream for a pre-drawn integer key plus extra words (e.g. channel index)."""
    seq = np.random.SeedSequence([int(key) & _MASK64, *(int(e) for e in extra)])
    return np.random.Generator(np.random.Philox(seq))
