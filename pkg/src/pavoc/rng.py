"""Deterministic random streams.

All stochastic code in the package draws from counter-based Philox
generators so that a (seed, inputs) pair always yields bit-identical
results, independent of call ordering elsewhere in the process.
Gaussian variates use Box-Muller on the uniform stream, which keeps the
draw order (and therefore reproducibility) explicit.
"""

from __future__ import annotations

import hashlib

import numpy as np


def philox(*key: int) -> np.random.Generator:
    """Return a Generator over a Philox stream keyed by one or more integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(list(key))))


def float_key(x: float) -> int:
    """Map a float to a stable integer key (its IEEE-754 bit pattern)."""
    return int(np.float64(x).view(np.uint64))


def standard_normal(rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` standard normal variates via Box-Muller.

    Consumes ceil(n/2) pairs of uniforms; 1-u keeps the log argument in
    (0, 1] so no draw can produce log(0).
    """
    if n == 0:
        return np.zeros(0)
    m = (n + 1) // 2
    u1 = rng.random(m)
    u2 = rng.random(m)
    r = np.sqrt(-2.0 * np.log1p(-u1))
    theta = 2.0 * np.pi * u2
    return np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:n]


def normal_matrix(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Row-major matrix of standard normals drawn in a fixed order."""
    return standard_normal(rng, rows * cols).reshape(rows, cols)


def seed_for_path(seed: int, path: str) -> int:
    """Derive a per-file seed as seed XOR the first 8 bytes of sha256(path)."""
    digest = hashlib.sha256(path.encode("utf-8")).digest()
    return (seed ^ int.from_bytes(digest[:8], "little")) & 0xFFFFFFFFFFFFFFFF
