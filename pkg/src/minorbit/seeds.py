"""Deterministic seed derivation.

Seeds are the first 8 bytes (big-endian) of ``sha256("root:name1:name2...")``,
so they are identical on every platform and Python version.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root_seed: int, *names) -> int:
    key = ":".join([str(int(root_seed))] + [str(n) for n in names])
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "big")


def rng_for(root_seed: int, *names) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root_seed, *names))
