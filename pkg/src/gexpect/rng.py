"""Counter-based random streams for reproducible, order-independent sampling.

Every variate is a pure function of a 64-bit seed plus an index tuple
(e.g. ``(path, step, coordinate)``), so results never depend on how work
is split across workers or in what order samples are drawn.  Uniforms come
from a chained splitmix64 hash; normals from the exact inverse CDF
(``scipy.special.ndtri``), which is the single documented transcendental
source for all Gaussian sampling in this package.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U64 = np.uint64


def _mix(x):
    """splitmix64 finalizer, elementwise on uint64 scalars/arrays."""
    x = (x + _GOLDEN)
    x = (x ^ (x >> _U64(30))) * _MIX1
    x = (x ^ (x >> _U64(27))) * _MIX2
    return x ^ (x >> _U64(31))


def counter_hash(seed: int, *indices) -> np.ndarray:
    """Hash (seed, *indices) into uint64 words.

    ``indices`` are integer arrays (broadcast together) or scalars; the
    chain is order-sensitive, so (a, b) and (b, a) give unrelated streams.
    """
    with np.errstate(over="ignore"):
        h = _mix(np.asarray(_U64(int(seed) & 0xFFFFFFFFFFFFFFFF)))
        for ix in indices:
            ix_u = np.asarray(ix).astype(np.uint64)
            h = _mix(h ^ ix_u)
    return h


def counter_uniform(seed: int, *indices) -> np.ndarray:
    """Uniform variates on the open interval (0, 1), keyed by (seed, *indices)."""
    h = counter_hash(seed, *indices)
    # top 53 bits, offset by half a lattice spacing: strictly inside (0, 1)
    return ((h >> _U64(11)).astype(np.float64) + 0.5) * (2.0 ** -53)


def counter_normal(seed: int, *indices) -> np.ndarray:
    """Standard normal variates keyed by (seed, *indices) via inverse CDF."""
    return ndtri(counter_uniform(seed, *indices))


def counter_uniform_in(lo: float, hi: float, seed: int, *indices) -> np.ndarray:
    """Uniform variates on [lo, hi), keyed by (seed, *indices)."""
    return lo + (hi - lo) * counter_uniform(seed, *indices)
