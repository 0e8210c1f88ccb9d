"""Counter-based normal increments keyed by ``(seed, path, step)``.

Each path owns a Philox stream keyed by ``(seed, path)``; step ``k`` always
consumes the same block of counters, so increments do not depend on how
paths are batched or ordered.  Normals come from the inverse normal CDF.
"""
from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1


def _stream(seed: int, path: int) -> np.random.Philox:
    return np.random.Philox(key=np.array([seed & _MASK64, path & _MASK64], dtype=np.uint64))


def uniforms(seed: int, path: int, count: int) -> np.ndarray:
    """``count`` doubles in the open interval ``(0, 1)`` from the ``(seed, path)`` stream."""
    raw = _stream(seed, path).random_raw(count)
    return ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normal_increments(seed: int, paths, steps: int, dim: int, dt: float) -> np.ndarray:
    """Wiener increments of shape ``(len(paths), steps, dim)`` with variance ``dt``."""
    paths = np.atleast_1d(np.asarray(paths, dtype=np.int64))
    out = np.empty((paths.size, steps, dim))
    scale = np.sqrt(dt)
    for i, p in enumerate(paths):
        out[i] = ndtri(uniforms(seed, int(p), steps * dim)).reshape(steps, dim) * scale
    return out


def coarsen(increments: np.ndarray, factor: int = 2) -> np.ndarray:
    """Sum consecutive blocks of ``factor`` increments along the step axis."""
    inc = np.asarray(increments, float)
    steps = inc.shape[-2]
    if steps % factor:
        raise ValueError("step count is not divisible by the coarsening factor")
    shape = inc.shape[:-2] + (steps // factor, factor, inc.shape[-1])
    return inc.reshape(shape).sum(axis=-2)
