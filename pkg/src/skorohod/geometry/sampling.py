"""Deterministic point sets used by the sampled sup/inf functionals."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import GeometryError


@dataclass(frozen=True)
class Resolution:
    """Sample counts for functionals defined as sups over continua.

    Attributes
    ----------
    time_samples : int
        Number of base times ``s`` scanned on ``[0, T]``.
    gap_samples : int
        Number of time gaps ``0 < g <= r`` tried for every base time.
    spacing : float
        Spatial spacing of boundary and interior samples.
    sphere : int
        Size of the Fibonacci lattice on the unit sphere.
    local_times : int
        Times scanned inside the window ``[s, s + eta]``.
    refine : bool
        Run a local refinement pass around the best sample.
    """

    time_samples: int = 65
    gap_samples: int = 4
    spacing: float = 0.01
    sphere: int = 256
    local_times: int = 5
    refine: bool = True

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, spec) -> "Resolution":
        if spec is None:
            return cls()
        if isinstance(spec, Resolution):
            return spec
        return cls(**spec)


def sphere_lattice(dim: int, count: int) -> np.ndarray:
    """Nearly uniform unit vectors: exact circle grid in 2-D, Fibonacci in 3-D."""
    if dim == 1:
        return np.array([[-1.0], [1.0]])
    if dim == 2:
        ang = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack((np.cos(ang), np.sin(ang)))
    if dim == 3:
        i = np.arange(count) + 0.5
        phi = np.arccos(1.0 - 2.0 * i / count)
        theta = np.pi * (1.0 + 5.0**0.5) * i
        return np.column_stack((np.cos(theta) * np.sin(phi),
                                np.sin(theta) * np.sin(phi),
                                np.cos(phi)))
    rng = np.random.default_rng(dim * 1_000_003 + count)
    u = rng.standard_normal((count, dim))
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def circle_points(center, radius: float, spacing: float) -> np.ndarray:
    n = max(16, int(np.ceil(2.0 * np.pi * radius / spacing)))
    ang = 2.0 * np.pi * np.arange(n) / n
    return np.asarray(center) + radius * np.column_stack((np.cos(ang), np.sin(ang)))


def sphere_points(center, radius: float, spacing: float) -> np.ndarray:
    n = max(64, int(np.ceil(4.0 * np.pi * radius**2 / spacing**2)))
    return np.asarray(center) + radius * sphere_lattice(3, n)


def segment_points(a, b, spacing: float) -> np.ndarray:
    a, b = np.asarray(a, float), np.asarray(b, float)
    n = max(2, int(np.ceil(np.linalg.norm(b - a) / spacing)) + 1)
    s = np.linspace(0.0, 1.0, n)[:, None]
    return a + s * (b - a)


def box_grid(lo, hi, spacing: float, max_points: int = 400_000) -> np.ndarray:
    """Regular grid covering the box ``[lo, hi]`` (inclusive)."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    counts = np.maximum(2, np.ceil((hi - lo) / spacing).astype(int) + 1)
    if np.prod(counts.astype(float)) > max_points:
        scale = (np.prod(counts.astype(float)) / max_points) ** (1.0 / lo.size)
        counts = np.maximum(2, (counts / scale).astype(int))
    axes = [np.linspace(l, h, c) for l, h, c in zip(lo, hi, counts)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.column_stack([m.reshape(-1) for m in mesh])


def in_region(points: np.ndarray, region) -> np.ndarray:
    if region is None:
        return points
    lo, hi = region
    keep = np.all((points >= np.asarray(lo) - 1e-12) & (points <= np.asarray(hi) + 1e-12), axis=1)
    return points[keep]


def ball_region(center, radius: float):
    center = np.asarray(center, float)
    return center - radius, center + radius


def require_dim(dim: int, supported=(1, 2, 3)):
    if dim not in supported:
        raise GeometryError(f"sampling is implemented for dimensions {supported}, got {dim}")
