"""Deterministic seed splitting.

Every random stream is derived from ``(master seed, component name,
index)`` through SHA-256, so results do not depend on how work is divided
between threads or batches.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["child_seed", "child_rng", "MAX_SEED"]

MAX_SEED = 2**64 - 1


def child_seed(master: int, component: str, index: int = 0) -> int:
    """64-bit child seed for ``(master, component, index)``."""
    if not 0 <= int(master) <= MAX_SEED:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {master}")
    digest = hashlib.sha256(f"{int(master)}:{component}:{int(index)}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def child_rng(master: int, component: str, index: int = 0) -> np.random.Generator:
    return np.random.default_rng(child_seed(master, component, index))
