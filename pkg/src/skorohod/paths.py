"""Piecewise-constant càdlàg paths on time grids.

A :class:`SampledCadlagPath` holds one d-vector per grid node and is constant
on every half-open interval ``[t_k, t_{k+1})``.  Jumps therefore sit exactly
at grid nodes and the left limit at ``t_k`` is the value of node ``k - 1``.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import ConvexHull, QhullError
from scipy.spatial.distance import pdist

from .errors import DomainError

DEFAULT_TOL = 1e-9

# Relative slack used when locating a time among the grid nodes.
_SNAP = 1e-12


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Strictly increasing partition ``0 = t_0 < ... < t_N = T``."""

    times: np.ndarray

    def __post_init__(self):
        times = np.array(self.times, dtype=float)
        if times.ndim != 1 or times.size < 2:
            raise DomainError("a time grid needs at least two nodes")
        if times[0] != 0.0:
            raise DomainError("a time grid must start at t = 0")
        if not np.all(np.isfinite(times)) or np.any(np.diff(times) <= 0.0):
            raise DomainError("grid times must be finite and strictly increasing")
        times.setflags(write=False)
        object.__setattr__(self, "times", times)

    @classmethod
    def dyadic(cls, horizon: float, level: int) -> "TimeGrid":
        """Grid ``k T / 2**level``; nodes of coarser levels are bit-identical."""
        if level < 0:
            raise DomainError("dyadic level must be nonnegative")
        n = 2**level
        return cls(horizon * (np.arange(n + 1) / n))

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def steps(self) -> int:
        return self.times.size - 1

    @property
    def mesh(self) -> float:
        """Largest step ``max_k (t_{k+1} - t_k)``."""
        return float(np.max(np.diff(self.times)))

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.times, other.times)

    def __hash__(self):
        return hash(self.times.tobytes())

    def index_at(self, t: float) -> int:
        """Index of the node whose value is active at time ``t``."""
        self._check_time(t)
        snap = _SNAP * max(1.0, self.horizon)
        return int(np.searchsorted(self.times, t + snap, side="right") - 1)

    def _check_time(self, t: float):
        snap = _SNAP * max(1.0, self.horizon)
        if not (-snap <= t <= self.horizon + snap):
            raise DomainError(f"time {t!r} outside [0, {self.horizon!r}]")


@dataclass(frozen=True, eq=False)
class SampledCadlagPath:
    """Right-continuous step path; ``values[k]`` holds on ``[t_k, t_{k+1})``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[1] < 1:
            raise DomainError("path values must be an (N+1, d) array")
        if values.shape[0] != len(self.grid):
            raise DomainError(
                f"{values.shape[0]} values for a grid of {len(self.grid)} nodes"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def horizon(self) -> float:
        return self.grid.horizon

    def __call__(self, t):
        """Evaluate the step path at one time or an array of times."""
        t_arr = np.asarray(t, dtype=float)
        snap = _SNAP * max(1.0, self.horizon)
        if np.any(t_arr < -snap) or np.any(t_arr > self.horizon + snap):
            raise DomainError("evaluation time outside the path horizon")
        idx = np.searchsorted(self.times, t_arr + snap, side="right") - 1
        return self.values[idx]

    def left_limit(self, k: int) -> np.ndarray:
        return self.values[max(k - 1, 0)]

    @classmethod
    def constant(cls, grid: TimeGrid, value) -> "SampledCadlagPath":
        value = np.atleast_1d(np.asarray(value, dtype=float))
        return cls(grid, np.tile(value, (len(grid), 1)))

    @classmethod
    def from_function(cls, grid: TimeGrid, func) -> "SampledCadlagPath":
        """Sample ``func(t) -> d-vector`` at the grid nodes."""
        rows = [np.atleast_1d(np.asarray(func(t), dtype=float)) for t in grid.times]
        return cls(grid, np.vstack(rows))

    # -- CSV -----------------------------------------------------------------

    def to_csv(self, target=None) -> str:
        """Write ``t,v1,...,vd`` rows; floats use shortest round-trip repr."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t"] + [f"v{i + 1}" for i in range(self.dim)])
        for t, row in zip(self.times, self.values):
            writer.writerow([repr(float(t))] + [repr(float(v)) for v in row])
        text = buf.getvalue()
        if target is not None:
            Path(target).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "SampledCadlagPath":
        """Read a path written by :meth:`to_csv` (a path or the CSV text)."""
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text()
        else:
            text = source
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], [r for r in rows[1:] if r]
        if not header or header[0] != "t":
            raise DomainError("CSV header must start with 't'")
        data = np.array([[float(v) for v in r] for r in body], dtype=float)
        if data.shape[1] != len(header):
            raise DomainError("CSV rows do not match the header width")
        return cls(TimeGrid(data[:, 0]), data[:, 1:])


@dataclass(frozen=True, eq=False)
class ReflectionRecord:
    """Reflection term ``lambda``, its total variation and push directions.

    ``gammas[k]`` is the unit push direction used on step ``k -> k+1`` or a
    row of NaNs when no push happened on that step.
    """

    grid: TimeGrid
    lam: np.ndarray
    total_variation: np.ndarray
    gammas: np.ndarray = field(default=None)

    def __post_init__(self):
        lam = np.array(self.lam, dtype=float)
        if lam.ndim == 1:
            lam = lam[:, None]
        tv = np.array(self.total_variation, dtype=float).reshape(-1)
        n = len(self.grid)
        if lam.shape[0] != n or tv.shape[0] != n:
            raise DomainError("reflection arrays must have one entry per grid node")
        if self.gammas is None:
            gammas = np.full((n - 1, lam.shape[1]), np.nan)
        else:
            gammas = np.array(self.gammas, dtype=float).reshape(n - 1, lam.shape[1])
        for arr in (lam, tv, gammas):
            arr.setflags(write=False)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "total_variation", tv)
        object.__setattr__(self, "gammas", gammas)

    @property
    def pushed(self) -> np.ndarray:
        """Boolean mask of steps carrying a push direction."""
        return ~np.isnan(self.gammas[:, 0])

    def lambda_path(self) -> SampledCadlagPath:
        return SampledCadlagPath(self.grid, self.lam)

    def variation_path(self) -> SampledCadlagPath:
        return SampledCadlagPath(self.grid, self.total_variation[:, None])

    def check(self, tol: float = DEFAULT_TOL) -> list[str]:
        """Return violated record invariants (empty when consistent)."""
        problems = []
        dtv = np.diff(self.total_variation)
        if np.any(dtv < -tol):
            problems.append(f"total variation decreases at step {int(np.argmin(dtv))}")
        dlam = np.diff(self.lam, axis=0)
        norms = np.linalg.norm(dlam, axis=1)
        scale = tol * np.maximum(1.0, np.abs(self.total_variation[1:]))
        bad = np.flatnonzero(np.abs(norms - dtv) > scale)
        if bad.size:
            problems.append(f"|d lambda| != d|lambda| at step {int(bad[0])}")
        pushed = self.pushed
        grew = dtv > tol
        mismatch = np.flatnonzero(pushed != grew)
        if mismatch.size:
            problems.append(f"gamma presence disagrees with |lambda| growth at step {int(mismatch[0])}")
        for k in np.flatnonzero(pushed & grew):
            g = self.gammas[k]
            if abs(np.linalg.norm(g) - 1.0) > 1e-6:
                problems.append(f"gamma at step {k} is not a unit vector")
                break
            residual = dlam[k] - np.dot(dlam[k], g) * g
            if np.dot(dlam[k], g) < -tol or np.linalg.norm(residual) > scale[k] + 1e-9 * norms[k]:
                problems.append(f"d lambda at step {k} is not along gamma")
                break
        return problems


def _diameter(points: np.ndarray) -> float:
    """Largest pairwise Euclidean distance of a point cloud."""
    m, d = points.shape
    if m < 2:
        return 0.0
    if d == 1:
        return float(points.max() - points.min())
    if m > 512:
        flat = _affine_span(points)
        if flat is not None:
            return _diameter(flat)
        try:
            points = points[ConvexHull(points).vertices]
        except (QhullError, ValueError):
            points = np.unique(points, axis=0)
            if points.shape[0] > 4096:
                return _chunked_diameter(points)
    return float(pdist(points).max()) if points.shape[0] > 1 else 0.0


def _affine_span(points: np.ndarray, rtol: float = 1e-12) -> np.ndarray | None:
    """Coordinates in the affine span when the cloud is flat, else ``None``.

    Projection onto an orthonormal basis of the span preserves distances, and
    Qhull rejects flat clouds, so flat clouds are reduced before hulling.
    """
    centred = points - points.mean(axis=0)
    _, sing, vt = np.linalg.svd(centred, full_matrices=False)
    rank = int(np.count_nonzero(sing > rtol * max(sing[0], 1e-300)))
    if rank >= points.shape[1]:
        return None
    return centred @ vt[:max(rank, 1)].T


def _chunked_diameter(points: np.ndarray, chunk: int = 1024) -> float:
    best = 0.0
    for start in range(0, points.shape[0], chunk):
        block = points[start:start + chunk]
        dist = np.linalg.norm(block[:, None, :] - points[None, :, :], axis=2)
        best = max(best, float(dist.max()))
    return best


def _window(path: SampledCadlagPath, t1: float, t2: float) -> tuple[int, int]:
    if t1 > t2:
        raise DomainError(f"empty window [{t1!r}, {t2!r}]")
    return path.grid.index_at(t1), path.grid.index_at(t2)


def oscillation(path: SampledCadlagPath, t1: float, t2: float) -> float:
    """``sup_{t1 <= r <= s <= t2} |w_s - w_r|`` for the step path.

    The value active at ``t1`` (the last node at or before it) is included, so
    the result is exact for step paths.
    """
    k1, k2 = _window(path, t1, t2)
    if k1 == k2:
        return 0.0
    return _diameter(path.values[k1:k2 + 1])


def max_jump(path: SampledCadlagPath) -> float:
    """Largest jump ``|w_t - w_{t-}|``; membership test for ``D^delta``."""
    if path.values.shape[0] < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(path.values, axis=0), axis=1).max())


def step_oscillations(path: SampledCadlagPath, grid: TimeGrid) -> np.ndarray:
    """Oscillation of ``path`` over each closed interval ``[t_{k-1}, t_k]`` of ``grid``."""
    idx = np.searchsorted(
        path.times, grid.times + _SNAP * max(1.0, path.horizon), side="right"
    ) - 1
    out = np.empty(grid.steps)
    d = path.dim
    for k in range(grid.steps):
        lo, hi = idx[k], idx[k + 1]
        block = path.values[lo:hi + 1]
        if d == 1:
            out[k] = block.max() - block.min() if block.shape[0] > 1 else 0.0
        else:
            out[k] = _diameter(block)
    return out


def restrict(path: SampledCadlagPath, t1: float, t2: float) -> SampledCadlagPath:
    """Sub-path on ``[t1, t2]`` re-based so that it starts at time 0.

    The value at ``t1`` is the one active there (càdlàg convention); a node is
    inserted at ``t1`` and ``t2`` when they are not grid nodes.
    """
    k1, k2 = _window(path, t1, t2)
    if t2 <= t1:
        raise DomainError("restrict needs a window of positive length")
    times = path.times
    inner = np.arange(k1 + 1, k2 + 1)
    new_times = np.concatenate(([t1], times[inner]))
    new_values = np.concatenate((path.values[k1:k1 + 1], path.values[inner]))
    if new_times[-1] < t2:
        new_times = np.append(new_times, t2)
        new_values = np.vstack((new_values, path.values[k2]))
    return SampledCadlagPath(TimeGrid(new_times - t1), new_values)
