"""Time-dependent domains ``D_t`` with a level-set description.

Every family implements a signed function ``psi(t, z)`` that is positive
inside, zero on the boundary and negative outside, plus closest-point and
normal queries.  Queries take a scalar time and points of shape ``(..., d)``.
"""
from __future__ import annotations

import enum
import itertools
import math
from abc import ABC, abstractmethod

import numpy as np

from ..errors import DegenerateGeometryError, GeometryError, ProjectionError
from .sampling import (box_grid, circle_points, in_region, require_dim, segment_points,
                       sphere_points)
from .timefunc import Constant, TimeFunction, parse_time_function

EPS_PSI = 1e-8


class Membership(enum.Enum):
    INTERIOR = "interior"
    BOUNDARY = "boundary"
    EXTERIOR = "exterior"


def _pts(z) -> np.ndarray:
    return np.asarray(z, dtype=float)


def _eval(funcs, t) -> np.ndarray:
    return np.array([f(t) for f in funcs], dtype=float)


class TimeDependentDomain(ABC):
    """Queryable geometry of ``D = {(t, z) : z in D_t}`` on ``[0, T]``."""

    family = "abstract"
    convex = False

    def __init__(self, dim: int, horizon: float, eps_psi: float = EPS_PSI):
        if dim < 1:
            raise GeometryError("dimension must be positive")
        if not horizon > 0:
            raise GeometryError("horizon must be positive")
        self.dim = int(dim)
        self.horizon = float(horizon)
        self.eps_psi = float(eps_psi)

    # -- level set -------------------------------------------------------------

    @abstractmethod
    def psi(self, t: float, z) -> np.ndarray:
        """Signed level-set value, positive inside."""

    @abstractmethod
    def grad_psi(self, t: float, z) -> np.ndarray:
        """Spatial gradient of :meth:`psi`."""

    def _tolerance(self, t, z) -> np.ndarray:
        return self.eps_psi * np.maximum(np.linalg.norm(self.grad_psi(t, z), axis=-1), 1e-300)

    def classify(self, t: float, z) -> np.ndarray:
        """Vectorised membership: 1 interior, 0 boundary, -1 exterior."""
        z = _pts(z)
        val = self.psi(t, z)
        tol = self._tolerance(t, z)
        return np.where(np.abs(val) <= tol, 0, np.where(val > 0, 1, -1))

    def membership(self, t: float, z) -> Membership:
        code = int(self.classify(t, _pts(z)[None, :])[0])
        return {1: Membership.INTERIOR, 0: Membership.BOUNDARY, -1: Membership.EXTERIOR}[code]

    def in_closure(self, t: float, z) -> np.ndarray:
        return self.classify(t, z) >= 0

    # -- metric queries --------------------------------------------------------

    @abstractmethod
    def closest_boundary_point(self, t: float, z) -> np.ndarray:
        """Nearest point of ``dD_t`` for every point of ``z``."""

    def distance(self, t: float, z) -> np.ndarray:
        """``d(z, D_t)``: zero on the closure."""
        z = _pts(z)
        out = np.zeros(z.shape[:-1])
        outside = self.psi(t, z) < 0
        if np.any(outside):
            zo = z[outside]
            out[outside] = np.linalg.norm(zo - self.closest_boundary_point(t, zo), axis=-1)
        return out

    def boundary_distance(self, t: float, z) -> np.ndarray:
        """``d(z, dD_t)``."""
        z = _pts(z)
        return np.linalg.norm(z - self.closest_boundary_point(t, z), axis=-1)

    @abstractmethod
    def normals(self, t: float, z) -> np.ndarray:
        """Inward unit normals (rows) at the boundary point ``z``."""

    # -- sampling ----------------------------------------------------------------

    @abstractmethod
    def bounding_box(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned box containing ``D_t``."""

    @abstractmethod
    def boundary_samples(self, t: float, spacing: float, region=None) -> np.ndarray:
        """Points of ``dD_t`` roughly ``spacing`` apart, optionally inside a box."""

    def closure_samples(self, t: float, spacing: float, region=None) -> np.ndarray:
        """Grid points of the closure plus boundary samples."""
        lo, hi = self.bounding_box(t)
        if region is not None:
            lo = np.maximum(lo, region[0])
            hi = np.minimum(hi, region[1])
            if np.any(lo > hi):
                return self.boundary_samples(t, spacing, region)
        grid = box_grid(lo, hi, spacing)
        inside = grid[self.classify(t, grid) >= 0]
        bnd = self.boundary_samples(t, spacing, region)
        return np.vstack((inside, bnd)) if bnd.size else inside

    # -- analytic shortcuts ------------------------------------------------------

    @property
    def time_independent(self) -> bool:
        return False

    @property
    def exterior_radius(self):
        """Analytic uniform exterior-sphere radius, ``inf`` if convex, else None."""
        return math.inf if self.convex else None

    def l_pair(self, s: float, t: float):
        """``sup_{z in closure(D_s)} d(z, D_t)`` in closed form, or None."""
        return None

    def lhat_pair(self, s: float, t: float):
        """``sup_{z in dD_s} d(z, dD_t)`` in closed form, or None."""
        return None

    def ray_hit(self, t: float, y, direction, step: float, max_dist: float) -> np.ndarray:
        """First point where the ray ``y + s*direction`` enters the closure.

        Marches with ``step`` until ``psi >= 0`` and bisects to ``1e-12``; the
        returned point lies on the closed side of the bracket.
        """
        y = _pts(y)
        direction = _pts(direction)
        if self.psi(t, y[None])[0] >= 0:
            return y.copy()
        lo, hi = 0.0, None
        s = step
        while s <= max_dist + step:
            if self.psi(t, (y + s * direction)[None])[0] >= 0:
                hi = s
                break
            lo = s
            s += step
        if hi is None:
            raise ProjectionError(f"ray did not reach the domain within {max_dist:.3g}")
        while hi - lo > 1e-12:
            mid = 0.5 * (lo + hi)
            if self.psi(t, (y + mid * direction)[None])[0] >= 0:
                hi = mid
            else:
                lo = mid
        return y + hi * direction

    def to_json(self) -> dict:
        raise NotImplementedError

    def check_slice(self, t: float):
        """Raise :class:`GeometryError` when ``D_t`` is empty or unbounded."""
        lo, hi = self.bounding_box(t)
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))) or np.any(hi < lo):
            raise GeometryError(f"slice at t={t} is empty or unbounded")


class MovingBall(TimeDependentDomain):
    """``D_t = {|z - c(t)| < R(t)}``."""

    family = "moving_ball"
    convex = True

    def __init__(self, center, radius, horizon: float, eps_psi: float = EPS_PSI):
        self.center = tuple(parse_time_function(c) for c in center)
        self.radius = parse_time_function(radius)
        super().__init__(len(self.center), horizon, eps_psi)

    @property
    def time_independent(self):
        return self.radius.is_constant and all(c.is_constant for c in self.center)

    def c(self, t):
        return _eval(self.center, t)

    def R(self, t):
        r = float(self.radius(t))
        if r <= 0:
            raise GeometryError(f"ball radius {r} <= 0 at t={t}")
        return r

    def psi(self, t, z):
        return self.R(t) - np.linalg.norm(_pts(z) - self.c(t), axis=-1)

    def grad_psi(self, t, z):
        v = _pts(z) - self.c(t)
        n = np.linalg.norm(v, axis=-1, keepdims=True)
        return -v / np.where(n > 0, n, 1.0)

    def _tolerance(self, t, z):
        return np.full(_pts(z).shape[:-1], self.eps_psi)

    def _radial(self, t, z):
        v = _pts(z) - self.c(t)
        n = np.linalg.norm(v, axis=-1, keepdims=True)
        fallback = np.zeros_like(v)
        fallback[..., 0] = 1.0
        return np.where(n > 0, v / np.where(n > 0, n, 1.0), fallback)

    def closest_boundary_point(self, t, z):
        return self.c(t) + self.R(t) * self._radial(t, z)

    def normals(self, t, z):
        return -self._radial(t, _pts(z)[None])[:1]

    def bounding_box(self, t):
        c, r = self.c(t), self.R(t)
        return c - r, c + r

    def boundary_samples(self, t, spacing, region=None):
        require_dim(self.dim)
        c, r = self.c(t), self.R(t)
        if self.dim == 1:
            pts = np.array([[c[0] - r], [c[0] + r]])
        elif self.dim == 2:
            pts = circle_points(c, r, spacing)
        else:
            pts = sphere_points(c, r, spacing)
        return in_region(pts, region)

    def l_pair(self, s, t):
        dc = float(np.linalg.norm(self.c(s) - self.c(t)))
        return max(dc + self.R(s) - self.R(t), 0.0)

    def lhat_pair(self, s, t):
        dc = float(np.linalg.norm(self.c(s) - self.c(t)))
        rs, rt = self.R(s), self.R(t)
        if self.dim == 1:
            ends = np.array([self.c(s)[0] - rs, self.c(s)[0] + rs])
            targets = np.array([self.c(t)[0] - rt, self.c(t)[0] + rt])
            return float(np.max(np.min(np.abs(ends[:, None] - targets[None, :]), axis=1)))
        near = abs(rs - dc) if dc <= rs else dc - rs
        return max(abs(rs + dc - rt), abs(near - rt))

    def ray_hit(self, t, y, direction, step, max_dist):
        y, g = _pts(y), _pts(direction)
        v = y - self.c(t)
        b = float(np.dot(v, g))
        q = float(np.dot(v, v)) - self.R(t) ** 2
        disc = b * b - q
        if q <= 0:
            return y.copy()
        if disc < 0 or -b - math.sqrt(disc) < 0:
            raise ProjectionError("ray misses the ball")
        s = -b - math.sqrt(disc)
        if s > max_dist + step:
            raise ProjectionError(f"ray did not reach the domain within {max_dist:.3g}")
        return y + s * g

    def to_json(self):
        return {"family": self.family, "center": [c.to_json() for c in self.center],
                "radius": self.radius.to_json()}


class MovingAnnulus(TimeDependentDomain):
    """``D_t = {rho(t) < |z - c(t)| < R(t)}``: the nonconvex test family."""

    family = "annulus"
    convex = False

    def __init__(self, center, inner, outer, horizon: float, eps_psi: float = EPS_PSI):
        self.center = tuple(parse_time_function(c) for c in center)
        self.inner = parse_time_function(inner)
        self.outer = parse_time_function(outer)
        super().__init__(len(self.center), horizon, eps_psi)
        if self.dim < 2:
            raise GeometryError("an annulus needs d >= 2")

    @property
    def time_independent(self):
        return self.inner.is_constant and self.outer.is_constant and all(
            c.is_constant for c in self.center)

    def c(self, t):
        return _eval(self.center, t)

    def radii(self, t):
        rho, R = float(self.inner(t)), float(self.outer(t))
        if not 0 < rho < R:
            raise GeometryError(f"annulus radii ({rho}, {R}) are degenerate at t={t}")
        return rho, R

    def psi(self, t, z):
        rho, R = self.radii(t)
        r = np.linalg.norm(_pts(z) - self.c(t), axis=-1)
        return np.minimum(R - r, r - rho)

    def _tolerance(self, t, z):
        return np.full(_pts(z).shape[:-1], self.eps_psi)

    def _radial(self, t, z):
        v = _pts(z) - self.c(t)
        n = np.linalg.norm(v, axis=-1, keepdims=True)
        fallback = np.zeros_like(v)
        fallback[..., 0] = 1.0
        return np.where(n > 0, v / np.where(n > 0, n, 1.0), fallback), n[..., 0]

    def grad_psi(self, t, z):
        rho, R = self.radii(t)
        u, r = self._radial(t, z)
        inner = (r - rho) < (R - r)
        return np.where(inner[..., None], u, -u)

    def closest_boundary_point(self, t, z):
        rho, R = self.radii(t)
        u, r = self._radial(t, z)
        target = np.where(np.abs(r - rho) <= np.abs(R - r), rho, R)
        return self.c(t) + target[..., None] * u

    def normals(self, t, z):
        rho, R = self.radii(t)
        u, r = self._radial(t, _pts(z)[None])
        sign = 1.0 if abs(r[0] - rho) <= abs(R - r[0]) else -1.0
        return sign * u[:1]

    def bounding_box(self, t):
        c = self.c(t)
        R = self.radii(t)[1]
        return c - R, c + R

    def boundary_samples(self, t, spacing, region=None):
        require_dim(self.dim, (2, 3))
        c = self.c(t)
        rho, R = self.radii(t)
        make = circle_points if self.dim == 2 else sphere_points
        return in_region(np.vstack((make(c, rho, spacing), make(c, R, spacing))), region)

    @property
    def exterior_radius(self):
        ts = np.linspace(0.0, self.horizon, 257)
        return float(np.min(self.inner(ts)))

    def _centered(self):
        return all(c.is_constant for c in self.center)

    def l_pair(self, s, t):
        if not self._centered():
            return None
        rs, Rs = self.radii(s)
        rt, Rt = self.radii(t)
        return max(Rs - Rt, rt - rs, 0.0)

    def lhat_pair(self, s, t):
        if not self._centered():
            return None
        rs, Rs = self.radii(s)
        rt, Rt = self.radii(t)
        return max(min(abs(rs - rt), abs(rs - Rt)), min(abs(Rs - Rt), abs(Rs - rt)))

    def to_json(self):
        return {"family": self.family, "center": [c.to_json() for c in self.center],
                "inner": self.inner.to_json(), "outer": self.outer.to_json()}


class MovingBox(TimeDependentDomain):
    """``D_t = prod_i (g_i(t), h_i(t))``."""

    family = "moving_box"
    convex = True

    def __init__(self, lower, upper, horizon: float, eps_psi: float = EPS_PSI):
        self.lower = tuple(parse_time_function(g) for g in lower)
        self.upper = tuple(parse_time_function(h) for h in upper)
        if len(self.lower) != len(self.upper):
            raise GeometryError("box needs one lower and one upper bound per axis")
        super().__init__(len(self.lower), horizon, eps_psi)

    @property
    def time_independent(self):
        return all(f.is_constant for f in self.lower + self.upper)

    def bounds(self, t):
        g, h = _eval(self.lower, t), _eval(self.upper, t)
        if np.any(h <= g):
            raise GeometryError(f"box slice is empty at t={t}")
        return g, h

    def _faces(self, t, z):
        g, h = self.bounds(t)
        z = _pts(z)
        return np.concatenate((z - g, h - z), axis=-1)

    def psi(self, t, z):
        return np.min(self._faces(t, z), axis=-1)

    def grad_psi(self, t, z):
        faces = self._faces(t, z)
        k = np.argmin(faces, axis=-1)
        eye = np.vstack((np.eye(self.dim), -np.eye(self.dim)))
        return eye[k]

    def _tolerance(self, t, z):
        return np.full(_pts(z).shape[:-1], self.eps_psi)

    def closest_boundary_point(self, t, z):
        g, h = self.bounds(t)
        z = _pts(z)
        clipped = np.clip(z, g, h)
        inside = np.all(z == clipped, axis=-1)
        out = clipped.copy()
        if np.any(inside):
            zi = z[inside]
            faces = np.concatenate((zi - g, h - zi), axis=-1)
            k = np.argmin(faces, axis=-1)
            rows = np.arange(zi.shape[0])
            axis = k % self.dim
            target = np.where(k < self.dim, g[axis], h[axis])
            zi = zi.copy()
            zi[rows, axis] = target
            out[inside] = zi
        return out

    def distance(self, t, z):
        g, h = self.bounds(t)
        z = _pts(z)
        return np.linalg.norm(z - np.clip(z, g, h), axis=-1)

    def normals(self, t, z):
        g, h = self.bounds(t)
        z = _pts(z)
        tol = self.eps_psi * max(1.0, float(np.max(np.abs(np.concatenate((g, h))))))
        rows = []
        for i in range(self.dim):
            if abs(z[i] - g[i]) <= tol:
                rows.append(np.eye(self.dim)[i])
            if abs(z[i] - h[i]) <= tol:
                rows.append(-np.eye(self.dim)[i])
        if not rows:
            raise GeometryError(f"point {z} is not on the box boundary at t={t}")
        return np.array(rows)

    def bounding_box(self, t):
        return self.bounds(t)

    def boundary_samples(self, t, spacing, region=None):
        require_dim(self.dim)
        g, h = self.bounds(t)
        if self.dim == 1:
            pts = np.array([[g[0]], [h[0]]])
        elif self.dim == 2:
            corners = [(g[0], g[1]), (h[0], g[1]), (h[0], h[1]), (g[0], h[1])]
            pts = np.vstack([segment_points(corners[i], corners[(i + 1) % 4], spacing)
                             for i in range(4)])
        else:
            faces = []
            for axis in range(3):
                others = [a for a in range(3) if a != axis]
                grid2 = box_grid(g[others], h[others], spacing)
                for val in (g[axis], h[axis]):
                    face = np.empty((grid2.shape[0], 3))
                    face[:, others] = grid2
                    face[:, axis] = val
                    faces.append(face)
            pts = np.vstack(faces)
        return in_region(pts, region)

    def l_pair(self, s, t):
        gs, hs = self.bounds(s)
        gt, ht = self.bounds(t)
        excess = np.maximum(np.maximum(gt - gs, hs - ht), 0.0)
        return float(np.linalg.norm(excess))

    def lhat_pair(self, s, t):
        if self.dim != 1:
            return None
        gs, hs = self.bounds(s)
        gt, ht = self.bounds(t)
        ends = np.array([gs[0], hs[0]])
        targets = np.array([gt[0], ht[0]])
        return float(np.max(np.min(np.abs(ends[:, None] - targets[None, :]), axis=1)))

    def ray_hit(self, t, y, direction, step, max_dist):
        g, h = self.bounds(t)
        y, d = _pts(y), _pts(direction)
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (g - y) / d
            t2 = (h - y) / d
        enter = np.where(d != 0, np.minimum(t1, t2), np.where((y >= g) & (y <= h), -np.inf, np.inf))
        leave = np.where(d != 0, np.maximum(t1, t2), np.where((y >= g) & (y <= h), np.inf, -np.inf))
        s_in, s_out = float(np.max(enter)), float(np.min(leave))
        if s_in > s_out or s_out < 0 or s_in > max_dist + step:
            raise ProjectionError("ray misses the box")
        p = y + max(s_in, 0.0) * d
        # land exactly on the entered face
        k = int(np.argmax(enter))
        p[k] = g[k] if d[k] > 0 else h[k]
        return np.clip(p, g, h)

    def to_json(self):
        return {"family": self.family, "lower": [f.to_json() for f in self.lower],
                "upper": [f.to_json() for f in self.upper]}


class MovingRoundedBox(TimeDependentDomain):
    """Points within ``radius`` of the box ``prod_i [g_i(t), h_i(t)]``.

    A smooth convex domain with flat faces; used for oblique reflection off a
    flat wall without corner singularities.
    """

    family = "rounded_box"
    convex = True

    def __init__(self, lower, upper, radius: float, horizon: float, eps_psi: float = EPS_PSI):
        self.core = MovingBox(lower, upper, horizon, eps_psi)
        self.radius = float(radius)
        if self.radius <= 0:
            raise GeometryError("rounding radius must be positive")
        super().__init__(self.core.dim, horizon, eps_psi)

    @property
    def time_independent(self):
        return self.core.time_independent

    def _split(self, t, z):
        g, h = self.core.bounds(t)
        z = _pts(z)
        clip = np.clip(z, g, h)
        v = z - clip
        dist = np.linalg.norm(v, axis=-1)
        inner = np.min(np.concatenate((z - g, h - z), axis=-1), axis=-1)
        return g, h, clip, v, dist, inner

    def psi(self, t, z):
        g, h, clip, v, dist, inner = self._split(t, z)
        return np.where(dist > 0, self.radius - dist, self.radius + inner)

    def grad_psi(self, t, z):
        g, h, clip, v, dist, inner = self._split(t, z)
        outer = -v / np.where(dist > 0, dist, 1.0)[..., None]
        return np.where((dist > 0)[..., None], outer, self.core.grad_psi(t, z))

    def _tolerance(self, t, z):
        return np.full(_pts(z).shape[:-1], self.eps_psi)

    def closest_boundary_point(self, t, z):
        g, h, clip, v, dist, inner = self._split(t, z)
        z = _pts(z)
        out = clip + self.radius * v / np.where(dist > 0, dist, 1.0)[..., None]
        core_pts = dist == 0
        if np.any(core_pts):
            zi = z[core_pts]
            faces = np.concatenate((zi - g, h - zi), axis=-1)
            k = np.argmin(faces, axis=-1)
            axis = k % self.dim
            target = np.where(k < self.dim, g[axis] - self.radius, h[axis] + self.radius)
            zi = zi.copy()
            zi[np.arange(zi.shape[0]), axis] = target
            out[core_pts] = zi
        return out

    def normals(self, t, z):
        g, h, clip, v, dist, inner = self._split(t, _pts(z)[None])
        if dist[0] <= 0:
            raise GeometryError(f"point {z} is not on the rounded-box boundary")
        return (-v / dist[:, None])[:1]

    def bounding_box(self, t):
        g, h = self.core.bounds(t)
        return g - self.radius, h + self.radius

    def boundary_samples(self, t, spacing, region=None):
        require_dim(self.dim, (1, 2))
        g, h = self.core.bounds(t)
        r = self.radius
        if self.dim == 1:
            return in_region(np.array([[g[0] - r], [h[0] + r]]), region)
        parts = [
            segment_points((g[0], g[1] - r), (h[0], g[1] - r), spacing),
            segment_points((h[0] + r, g[1]), (h[0] + r, h[1]), spacing),
            segment_points((h[0], h[1] + r), (g[0], h[1] + r), spacing),
            segment_points((g[0] - r, h[1]), (g[0] - r, g[1]), spacing),
        ]
        n_arc = max(8, int(np.ceil(0.5 * np.pi * r / spacing)))
        for (cx, cy), start in (((h[0], g[1]), -0.5 * np.pi), ((h[0], h[1]), 0.0),
                                ((g[0], h[1]), 0.5 * np.pi), ((g[0], g[1]), np.pi)):
            ang = start + 0.5 * np.pi * np.arange(n_arc + 1) / n_arc
            parts.append(np.column_stack((cx + r * np.cos(ang), cy + r * np.sin(ang))))
        return in_region(np.vstack(parts), region)

    def l_pair(self, s, t):
        return self.core.l_pair(s, t)

    def to_json(self):
        return {"family": self.family, "lower": [f.to_json() for f in self.core.lower],
                "upper": [f.to_json() for f in self.core.upper], "radius": self.radius}


class MovingConvexPolytope(TimeDependentDomain):
    """``D_t = {z : <n_i, z> < b_i(t)}`` with fixed outward face normals ``n_i``."""

    family = "moving_convex_polytope"
    convex = True

    def __init__(self, normals, offsets, horizon: float, eps_psi: float = EPS_PSI):
        n = np.atleast_2d(np.asarray(normals, dtype=float))
        self.face_normals = n / np.linalg.norm(n, axis=1, keepdims=True)
        self._scale = np.linalg.norm(n, axis=1)
        self.offsets = tuple(parse_time_function(b) for b in offsets)
        if len(self.offsets) != n.shape[0]:
            raise GeometryError("one offset per face is required")
        super().__init__(n.shape[1], horizon, eps_psi)

    @property
    def time_independent(self):
        return all(b.is_constant for b in self.offsets)

    def b(self, t):
        return _eval(self.offsets, t) / self._scale

    def psi(self, t, z):
        return np.min(self.b(t) - _pts(z) @ self.face_normals.T, axis=-1)

    def grad_psi(self, t, z):
        k = np.argmin(self.b(t) - _pts(z) @ self.face_normals.T, axis=-1)
        return -self.face_normals[k]

    def _tolerance(self, t, z):
        return np.full(_pts(z).shape[:-1], self.eps_psi)

    def _active_sets(self):
        m = self.face_normals.shape[0]
        for size in range(1, min(self.dim, m) + 1):
            yield from itertools.combinations(range(m), size)

    def _project_exterior(self, t, z):
        b = self.b(t)
        best, best_d = None, math.inf
        tol = 1e-10 * max(1.0, float(np.max(np.abs(b))))
        for S in self._active_sets():
            N = self.face_normals[list(S)]
            gram = N @ N.T
            if abs(np.linalg.det(gram)) < 1e-12:
                continue
            y = z - N.T @ np.linalg.solve(gram, N @ z - b[list(S)])
            if np.all(self.face_normals @ y <= b + tol):
                d = float(np.linalg.norm(y - z))
                if d < best_d:
                    best, best_d = y, d
        if best is None:
            raise GeometryError("polytope slice appears to be empty")
        return best

    def closest_boundary_point(self, t, z):
        z = _pts(z)
        flat = z.reshape(-1, self.dim)
        out = np.empty_like(flat)
        b = self.b(t)
        slack = b[None, :] - flat @ self.face_normals.T
        for i, p in enumerate(flat):
            if np.all(slack[i] >= 0):
                k = int(np.argmin(slack[i]))
                out[i] = p + slack[i, k] * self.face_normals[k]
            else:
                out[i] = self._project_exterior(t, p)
        return out.reshape(z.shape)

    def normals(self, t, z):
        slack = self.b(t) - self.face_normals @ _pts(z)
        tol = self.eps_psi * max(1.0, float(np.max(np.abs(self.b(t)))))
        active = np.flatnonzero(np.abs(slack) <= tol)
        if active.size == 0:
            raise GeometryError(f"point {z} is not on the polytope boundary at t={t}")
        return -self.face_normals[active]

    def active_faces(self, t, z):
        slack = self.b(t) - self.face_normals @ _pts(z)
        tol = self.eps_psi * max(1.0, float(np.max(np.abs(self.b(t)))))
        return np.flatnonzero(np.abs(slack) <= tol)

    def vertices(self, t) -> np.ndarray:
        b = self.b(t)
        m = self.face_normals.shape[0]
        verts = []
        tol = 1e-10 * max(1.0, float(np.max(np.abs(b))))
        for S in itertools.combinations(range(m), self.dim):
            N = self.face_normals[list(S)]
            if abs(np.linalg.det(N)) < 1e-12:
                continue
            v = np.linalg.solve(N, b[list(S)])
            if np.all(self.face_normals @ v <= b + tol):
                verts.append(v)
        if not verts:
            raise GeometryError("polytope slice has no vertices (unbounded or empty)")
        verts = np.unique(np.round(np.array(verts), 14), axis=0)
        # bounded iff the normals positively span R^d; check via recession directions
        if self.face_normals.shape[0] <= self.dim:
            raise GeometryError("polytope slice is unbounded")
        return verts

    def bounding_box(self, t):
        v = self.vertices(t)
        return v.min(axis=0), v.max(axis=0)

    def boundary_samples(self, t, spacing, region=None):
        require_dim(self.dim, (1, 2))
        v = self.vertices(t)
        if self.dim == 1:
            return in_region(v, region)
        centroid = v.mean(axis=0)
        order = np.argsort(np.arctan2(v[:, 1] - centroid[1], v[:, 0] - centroid[0]))
        v = v[order]
        pts = np.vstack([segment_points(v[i], v[(i + 1) % len(v)], spacing)
                         for i in range(len(v))])
        return in_region(pts, region)

    def l_pair(self, s, t):
        try:
            v = self.vertices(s)
        except GeometryError:
            return None
        return float(np.max(self.distance(t, v)))

    def to_json(self):
        return {"family": self.family, "normals": (self.face_normals * self._scale[:, None]).tolist(),
                "offsets": [b.to_json() for b in self.offsets]}


class LevelSetDomain(TimeDependentDomain):
    """Domain given by a user level-set function ``psi(t, z) > 0``.

    Parameters
    ----------
    psi : callable
        Vectorised ``psi(t, z)`` for ``z`` of shape ``(..., d)``.
    bbox : callable or pair
        ``bbox(t) -> (lo, hi)`` or a fixed pair enclosing every slice.
    grad : callable, optional
        Spatial gradient; central differences are used when omitted.
    grad_floor : float
        Smallest admissible ``|grad psi|`` on the boundary.
    """

    family = "level_set"

    def __init__(self, psi, dim: int, horizon: float, bbox, grad=None, convex: bool = False,
                 exterior_radius=None, grad_floor: float = 1e-6, eps_psi: float = EPS_PSI,
                 spec=None):
        super().__init__(dim, horizon, eps_psi)
        self._psi = psi
        self._grad = grad
        self._bbox = bbox
        self.convex = bool(convex)
        self._r0 = exterior_radius
        self.grad_floor = float(grad_floor)
        self._spec = spec

    @property
    def exterior_radius(self):
        if self._r0 is not None:
            return float(self._r0)
        return math.inf if self.convex else None

    def psi(self, t, z):
        return np.asarray(self._psi(t, _pts(z)), dtype=float)

    def grad_psi(self, t, z):
        z = _pts(z)
        if self._grad is not None:
            return np.asarray(self._grad(t, z), dtype=float)
        h = 1e-6
        out = np.empty(z.shape)
        for i in range(self.dim):
            dz = np.zeros(self.dim)
            dz[i] = h
            out[..., i] = (self.psi(t, z + dz) - self.psi(t, z - dz)) / (2 * h)
        return out

    def bounding_box(self, t):
        box = self._bbox(t) if callable(self._bbox) else self._bbox
        return np.asarray(box[0], float), np.asarray(box[1], float)

    def closest_boundary_point(self, t, z, iterations: int = 60):
        """Closest point by linearised-constraint iterations from ``z``."""
        z = _pts(z)
        flat = z.reshape(-1, self.dim)
        y = flat.copy()
        # move onto the zero set along the gradient first
        for _ in range(iterations):
            g = self.grad_psi(t, y)
            gn2 = np.sum(g * g, axis=-1)
            if np.any(gn2 < self.grad_floor**2):
                raise DegenerateGeometryError("level-set gradient vanishes during projection")
            step = (self.psi(t, y) / gn2)[:, None] * g
            y = y - step
            if np.max(np.linalg.norm(step, axis=-1)) < 1e-14:
                break
        for _ in range(iterations):
            g = self.grad_psi(t, y)
            gn2 = np.sum(g * g, axis=-1)
            lin = self.psi(t, y) + np.sum(g * (flat - y), axis=-1)
            y_new = flat - (lin / gn2)[:, None] * g
            moved = np.max(np.linalg.norm(y_new - y, axis=-1))
            y = y_new
            if moved < 1e-14:
                break
        # final polish onto the zero set
        for _ in range(3):
            g = self.grad_psi(t, y)
            y = y - (self.psi(t, y) / np.sum(g * g, axis=-1))[:, None] * g
        return y.reshape(z.shape)

    def normals(self, t, z):
        g = self.grad_psi(t, _pts(z)[None])[0]
        n = float(np.linalg.norm(g))
        if n < self.grad_floor:
            raise DegenerateGeometryError(f"|grad psi| = {n:.3g} below floor at t={t}, z={z}")
        return (g / n)[None]

    def boundary_samples(self, t, spacing, region=None):
        """Zero crossings of ``psi`` along grid edges, refined by bisection."""
        require_dim(self.dim, (1, 2, 3))
        lo, hi = self.bounding_box(t)
        if region is not None:
            lo = np.maximum(lo, region[0])
            hi = np.minimum(hi, region[1])
            if np.any(lo > hi):
                return np.empty((0, self.dim))
        counts = np.maximum(2, np.ceil((hi - lo) / spacing).astype(int) + 1)
        axes = [np.linspace(l, h, c) for l, h, c in zip(lo, hi, counts)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        vals = self.psi(t, mesh)
        found = []
        for axis in range(self.dim):
            a = np.take(vals, np.arange(vals.shape[axis] - 1), axis=axis)
            b = np.take(vals, np.arange(1, vals.shape[axis]), axis=axis)
            mask = (a >= 0) != (b >= 0)
            if not np.any(mask):
                continue
            pa = np.take(mesh, np.arange(mesh.shape[axis] - 1), axis=axis)[mask]
            pb = np.take(mesh, np.arange(1, mesh.shape[axis]), axis=axis)[mask]
            inside_a = a[mask] >= 0
            p_in = np.where(inside_a[:, None], pa, pb)
            p_out = np.where(inside_a[:, None], pb, pa)
            for _ in range(48):
                mid = 0.5 * (p_in + p_out)
                ok = self.psi(t, mid) >= 0
                p_in = np.where(ok[:, None], mid, p_in)
                p_out = np.where(ok[:, None], p_out, mid)
            found.append(p_in)
        if not found:
            return np.empty((0, self.dim))
        return np.vstack(found)

    def to_json(self):
        if self._spec is None:
            raise GeometryError("this level-set domain was built from Python callables")
        return dict(self._spec)


def ellipse_domain(center, axes, horizon: float) -> LevelSetDomain:
    """Level-set ellipse ``1 - sum_i ((z_i - c_i(t)) / a_i(t))**2 > 0``."""
    center = tuple(parse_time_function(c) for c in center)
    axes = tuple(parse_time_function(a) for a in axes)
    dim = len(center)

    def psi(t, z):
        c, a = _eval(center, t), _eval(axes, t)
        return 1.0 - np.sum(((z - c) / a) ** 2, axis=-1)

    def grad(t, z):
        c, a = _eval(center, t), _eval(axes, t)
        return -2.0 * (z - c) / a**2

    ts = np.linspace(0.0, horizon, 257)
    amax = max(float(np.max(f(ts))) for f in axes)
    cmin = np.array([float(np.min(f(ts))) for f in center])
    cmax = np.array([float(np.max(f(ts))) for f in center])
    bbox = (cmin - 1.05 * amax, cmax + 1.05 * amax)
    spec = {"family": "level_set", "shape": "ellipse",
            "center": [c.to_json() for c in center], "axes": [a.to_json() for a in axes]}
    return LevelSetDomain(psi, dim, horizon, bbox, grad=grad, convex=True, spec=spec)


def domain_from_json(spec: dict, horizon: float) -> TimeDependentDomain:
    """Build a domain from its JSON description (see README for the schema)."""
    from ..errors import ConfigError

    if not isinstance(spec, dict) or "family" not in spec:
        raise ConfigError("domain spec needs a 'family' field")
    fam = spec["family"]
    try:
        if fam == "moving_ball":
            return MovingBall(spec["center"], spec["radius"], horizon)
        if fam == "annulus":
            return MovingAnnulus(spec["center"], spec["inner"], spec["outer"], horizon)
        if fam == "moving_box":
            return MovingBox(spec["lower"], spec["upper"], horizon)
        if fam == "rounded_box":
            return MovingRoundedBox(spec["lower"], spec["upper"], float(spec["radius"]), horizon)
        if fam == "moving_convex_polytope":
            return MovingConvexPolytope(spec["normals"], spec["offsets"], horizon)
        if fam == "level_set":
            if spec.get("shape") != "ellipse":
                raise ConfigError("level_set domains from JSON support shape 'ellipse'")
            return ellipse_domain(spec["center"], spec["axes"], horizon)
    except KeyError as exc:
        raise ConfigError(f"domain family {fam!r} is missing field {exc}") from None
    raise ConfigError(f"unknown domain family {fam!r}")


__all__ = [
    "Constant", "TimeFunction", "Membership", "TimeDependentDomain", "MovingBall",
    "MovingAnnulus", "MovingBox", "MovingRoundedBox", "MovingConvexPolytope",
    "LevelSetDomain", "ellipse_domain", "domain_from_json",
]
