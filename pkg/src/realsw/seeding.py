"""Deterministic seed derivation for Monte Carlo trials.

A trial seed is the first 8 bytes of SHA-256 over
``"{master}|{scheme}|{n}|{trial}"``. Within a trial the source block is
drawn from stream 0 and encoder ``b`` (0-based) draws its matrix from stream
``b + 1``, so different schemes fed the same trial seed see the same source
block and the same matrices.
"""
from __future__ import annotations

import hashlib

import numpy as np


def trial_seed(master_seed: int, scheme: str, n: int, trial_index: int) -> int:
    key = f"{int(master_seed)}|{scheme}|{int(n)}|{int(trial_index)}".encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big")


def source_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), 0])


def encoder_rng(seed: int, encoder_index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(encoder_index) + 1])
