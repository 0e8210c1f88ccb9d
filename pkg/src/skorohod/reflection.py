"""Reflection cones, their interaction with the geometry, and oblique projection.

The cone ``Gamma_t(z)`` at a boundary point is represented by a finite set of
unit generators.  :func:`oblique_project` returns a boundary point ``y*`` such
that ``y* - y`` lies in the cone at ``y*``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from .errors import (BudgetError, ConfigError, DegenerateGeometryError, DomainError,
                     GeometryError, GoodProjectionViolated, ProjectionError)
from .geometry import (Constant, GeometryBudget, MovingAnnulus, MovingBall, MovingBox,
                       MovingConvexPolytope, MovingRoundedBox, LevelSetDomain, Resolution, TimeDependentDomain,
                       dyadic_radii, modulus_table, parse_time_function, sphere_lattice)
from .geometry.sampling import ball_region

ANGLE_TOL = 1e-6

_SMOOTH = (MovingBall, MovingAnnulus, MovingRoundedBox, LevelSetDomain)


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def tilt(normal, angle: float) -> np.ndarray:
    """Rotate a 2-D inward normal by ``angle`` (clockwise): ``cos a n + sin a n_perp``."""
    n = np.asarray(normal, dtype=float)
    if n.shape[-1] == 1:
        if angle != 0.0:
            raise GeometryError("a 1-D cone cannot be tilted")
        return n.copy()
    if n.shape[-1] != 2:
        raise GeometryError("angle-tilted cones are defined in 2-D only")
    perp = np.stack((n[..., 1], -n[..., 0]), axis=-1)
    return math.cos(angle) * n + math.sin(angle) * perp


class ConeField:
    """Base class; subclasses return generators of ``Gamma_t(z)``."""

    kind = "abstract"

    def generators(self, domain: TimeDependentDomain, t: float, z) -> np.ndarray:
        raise NotImplementedError

    def generators_many(self, domain: TimeDependentDomain, t: float, Y) -> list[np.ndarray]:
        return [self.generators(domain, t, y) for y in np.asarray(Y, float)]

    def q_ratio(self, horizon: float):
        """``q / ||Q||`` of the linear map sending normals to the cone, if known."""
        return None

    def to_json(self) -> dict:
        raise NotImplementedError


class NormalCone(ConeField):
    kind = "normal"

    def generators(self, domain, t, z):
        return domain.normals(t, z)

    def generators_many(self, domain, t, Y):
        Y = np.asarray(Y, float)
        if isinstance(domain, _SMOOTH) and Y.size:
            g = domain.grad_psi(t, Y)
            return list(_unit(g)[:, None, :])
        return super().generators_many(domain, t, Y)

    def q_ratio(self, horizon):
        return 1.0

    def to_json(self):
        return {"kind": "normal"}


class SingleDirection(ConeField):
    """One direction per boundary point.

    Either the inward normal tilted by ``theta(t)`` (2-D) or an arbitrary
    continuous unit field ``direction(t, z)``.
    """

    kind = "single"

    def __init__(self, theta=None, direction=None):
        if (theta is None) == (direction is None):
            raise ConfigError("give exactly one of theta or direction")
        self.theta = None if theta is None else parse_time_function(theta)
        self.direction = direction

    def generators(self, domain, t, z):
        if self.direction is not None:
            return _unit(np.asarray(self.direction(t, np.asarray(z, float)), float))[None]
        return np.array([tilt(n, float(self.theta(t))) for n in domain.normals(t, z)])

    def generators_many(self, domain, t, Y):
        Y = np.asarray(Y, float)
        if self.direction is None and isinstance(domain, _SMOOTH) and Y.size:
            n = _unit(domain.grad_psi(t, Y))
            return list(tilt(n, float(self.theta(t)))[:, None, :])
        return super().generators_many(domain, t, Y)

    def q_ratio(self, horizon):
        if self.theta is None:
            return None
        ts = np.linspace(0.0, horizon, 513)
        return float(np.min(np.cos(self.theta(ts))))

    def to_json(self):
        if self.theta is None:
            raise ConfigError("a direction-callable cone has no JSON form")
        return {"kind": "single", "theta": self.theta.to_json()}


class FiniteGenerators(ConeField):
    """Per-face generators for boxes and polytopes.

    ``faces[i]`` is either a tilt angle (2-D, relative to the face normal) or
    a fixed vector.  Box faces are numbered lower faces ``0..d-1`` then upper
    faces ``d..2d-1``.
    """

    kind = "generators"

    def __init__(self, faces):
        self.faces = []
        for f in faces:
            if isinstance(f, dict) and "vector" in f:
                self.faces.append(("vector", _unit(f["vector"])))
            elif isinstance(f, dict) and "tilt" in f:
                self.faces.append(("tilt", parse_time_function(f["tilt"])))
            elif isinstance(f, (list, tuple, np.ndarray)):
                self.faces.append(("vector", _unit(f)))
            else:
                self.faces.append(("tilt", parse_time_function(f)))

    @staticmethod
    def _active(domain, t, z):
        z = np.asarray(z, float)
        if isinstance(domain, MovingBox):
            g, h = domain.bounds(t)
            tol = domain.eps_psi * max(1.0, float(np.max(np.abs(np.concatenate((g, h))))))
            ids = [i for i in range(domain.dim) if abs(z[i] - g[i]) <= tol]
            ids += [domain.dim + i for i in range(domain.dim) if abs(z[i] - h[i]) <= tol]
            normals = [np.eye(domain.dim)[i] if i < domain.dim else -np.eye(domain.dim)[i - domain.dim]
                       for i in ids]
            return ids, normals
        if isinstance(domain, MovingConvexPolytope):
            ids = list(domain.active_faces(t, z))
            return ids, [-domain.face_normals[i] for i in ids]
        raise GeometryError("per-face generators need a box or polytope domain")

    def generators(self, domain, t, z):
        ids, normals = self._active(domain, t, z)
        if not ids:
            raise GeometryError(f"point {z} is not on a face at t={t}")
        out = []
        for i, n in zip(ids, normals):
            kind, val = self.faces[i]
            out.append(val if kind == "vector" else tilt(n, float(val(t))))
        return np.array(out)

    def to_json(self):
        faces = [{"vector": v.tolist()} if k == "vector" else {"tilt": v.to_json()}
                 for k, v in self.faces]
        return {"kind": "generators", "faces": faces}


def cone_from_json(spec) -> ConeField:
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError("cone spec needs a 'kind' field")
    kind = spec["kind"]
    if kind == "normal":
        return NormalCone()
    if kind == "single":
        if "theta" not in spec:
            raise ConfigError("single-direction cone needs 'theta'")
        return SingleDirection(theta=spec["theta"])
    if kind == "generators":
        return FiniteGenerators(spec.get("faces", []))
    raise ConfigError(f"unknown cone kind {kind!r}")


def cone_contains(generators, v, tol: float = ANGLE_TOL) -> bool:
    """Whether ``v`` lies in the convex cone spanned by ``generators`` (NNLS test)."""
    v = np.asarray(v, float)
    nv = float(np.linalg.norm(v))
    if nv == 0.0:
        return True
    G = np.atleast_2d(np.asarray(generators, float))
    if G.shape[0] == 1:
        g = G[0] / np.linalg.norm(G[0])
        return float(np.linalg.norm(v / nv - g)) <= tol
    _, residual = nnls(G.T, v / nv)
    return residual <= tol


def pairwise_opposition(generators) -> float:
    """Smallest pairwise inner product of generators (must stay above -1)."""
    G = np.atleast_2d(generators)
    if G.shape[0] < 2:
        return 1.0
    dots = G @ G.T
    return float(np.min(dots[np.triu_indices(G.shape[0], 1)]))


def cone_continuity_modulus(domain: TimeDependentDomain, cone: ConeField, r: float,
                            resolution: Resolution | None = None) -> float:
    """Sampled modulus ``sup |gamma_s(z) - gamma_t(z')|`` over ``|s-t|, |z-z'| <= r``.

    Only single-direction fields have one generator per point; for them the
    value is a proxy for continuity of the cone field along sequences
    ``(t_n, z_n) -> (t, z)`` of boundary points.

    Parameters
    ----------
    domain, cone
        The domain and a :class:`SingleDirection` cone field.
    r : float
        Joint space-time radius.
    resolution : Resolution, optional
        ``time_samples`` base times and ``spacing`` along the boundary.

    Returns
    -------
    float
        Largest generator gap found; ``0`` for a constant field.
    """
    from scipy.spatial import cKDTree

    if not isinstance(cone, SingleDirection):
        raise ConfigError("the continuity modulus is defined for single-direction cones")
    if r <= 0:
        raise DomainError("radius must be positive")
    res = resolution or Resolution()
    T = domain.horizon
    static = domain.time_independent and (cone.theta is None or isinstance(cone.theta, Constant))
    times = [0.0] if static else np.linspace(0.0, T, max(res.time_samples, 2))

    def field_at(t):
        Z = domain.boundary_samples(t, res.spacing)
        return Z, np.array([cone.generators(domain, t, z)[0] for z in Z])

    cache = {float(t): field_at(t) for t in times}
    worst = 0.0
    for s in cache:
        Zs, Gs = cache[s]
        for t in cache:
            if abs(t - s) > r + 1e-12 or t < s:
                continue
            Zt, Gt = cache[t]
            for i, js in enumerate(cKDTree(Zt).query_ball_point(Zs, r)):
                if js:
                    worst = max(worst, float(np.linalg.norm(Gt[js] - Gs[i], axis=1).max()))
    return worst


# -- interaction quantities --------------------------------------------------------


def _local_spacing(rho: float, res: Resolution) -> float:
    return min(res.spacing, rho / 16.0)


def _local_times(domain, s, eta, res: Resolution):
    end = min(s + eta, domain.horizon)
    if domain.time_independent or end <= s:
        return np.array([s])
    return np.linspace(s, end, max(res.local_times, 2))


def _patch(domain, t, z, rho, spacing):
    region = ball_region(z, rho)
    Y = domain.boundary_samples(t, spacing, region)
    if Y.size:
        Y = Y[np.linalg.norm(Y - z, axis=1) <= rho]
    return Y


def _neighborhood_generators(domain, cone, s, z, rho, eta, res):
    z = np.asarray(z, float)
    spacing = _local_spacing(rho, res)
    gens = []
    for t in _local_times(domain, s, eta, res):
        Y = _patch(domain, t, z, rho, spacing)
        if Y.size:
            gens.extend(cone.generators_many(domain, t, Y))
    if not gens:
        raise GeometryError(f"no boundary points within rho={rho} of z={z}")
    return np.vstack(gens)


def _maxmin(G: np.ndarray, u: np.ndarray) -> np.ndarray:
    return np.min(u @ G.T, axis=-1)


def sphere_maxmin(G: np.ndarray, lattice_size: int = 256, refine: bool = True) -> tuple[float, np.ndarray]:
    """``max_{|u|=1} min_{g in G} <g, u>`` by lattice search plus pattern refinement."""
    d = G.shape[1]
    U = sphere_lattice(d, lattice_size)
    mean = G.mean(axis=0)
    if np.linalg.norm(mean) > 0:
        U = np.vstack((U, mean / np.linalg.norm(mean)))
    vals = _maxmin(G, U)
    k = int(np.argmax(vals))
    u, best = U[k], float(vals[k])
    if refine and d > 1:
        step = 2.0 * np.pi / max(lattice_size, 4)
        basis = np.eye(d)
        while step > 1e-10:
            improved = False
            for e in basis:
                tangent = e - np.dot(e, u) * u
                if np.linalg.norm(tangent) < 1e-12:
                    continue
                tangent /= np.linalg.norm(tangent)
                for sign in (1.0, -1.0):
                    cand = math.cos(step) * u + sign * math.sin(step) * tangent
                    val = float(_maxmin(G, cand[None])[0])
                    if val > best:
                        u, best, improved = cand, val, True
            if not improved:
                step *= 0.5
    return best, u


def quantity_a(domain: TimeDependentDomain, cone: ConeField, s: float, z, rho: float, eta: float,
               resolution: Resolution | None = None) -> float:
    """Cone coherence ``max_u min <gamma, u>`` over the space-time neighbourhood."""
    if rho <= 0 or eta < 0:
        raise DomainError("rho must be positive and eta nonnegative")
    res = resolution or Resolution()
    G = _neighborhood_generators(domain, cone, s, z, rho, eta, res)
    return sphere_maxmin(G, res.sphere, res.refine)[0]


def quantity_c(domain: TimeDependentDomain, cone: ConeField, s: float, z, rho: float, eta: float,
               resolution: Resolution | None = None) -> float:
    """Skewness ``max (<gamma, y - zhat> / |y - zhat|) v 0`` over the neighbourhood."""
    if rho <= 0 or eta < 0:
        raise DomainError("rho must be positive and eta nonnegative")
    res = resolution or Resolution()
    z = np.asarray(z, float)
    spacing = _local_spacing(rho, res)
    best = 0.0
    found = False
    for t in _local_times(domain, s, eta, res):
        Y = _patch(domain, t, z, rho, spacing)
        if not Y.size:
            continue
        found = True
        Zh = domain.closure_samples(t, spacing, ball_region(z, rho))
        Zh = Zh[np.linalg.norm(Zh - z, axis=1) <= rho]
        gens = cone.generators_many(domain, t, Y)
        for y, G in zip(Y, gens):
            diff = y - Zh
            dist = np.linalg.norm(diff, axis=1)
            keep = dist > 1e-12
            if not np.any(keep):
                continue
            ratio = (diff[keep] @ G.T) / dist[keep, None]
            best = max(best, float(ratio.max()))
    if not found:
        raise GeometryError(f"no boundary points within rho={rho} of z={z}")
    return best


def quantity_e(a_val: float, c_val: float) -> float:
    """``c / max(a**2, a/2)``."""
    if not a_val > 0:
        raise DomainError(f"quantity e needs a > 0, got {a_val}")
    return c_val / max(a_val * a_val, a_val / 2.0)


# -- projection ------------------------------------------------------------------------


@dataclass(frozen=True)
class ProjectionResult:
    point: np.ndarray
    direction: np.ndarray | None
    stretch: float
    iterations: int
    distance: float = 0.0

    @property
    def moved(self) -> bool:
        return self.stretch > 0.0


def good_projection_constants(r0: float, q: float, q_norm: float) -> tuple[float, float]:
    """``delta0 = r0 (1 - sqrt(1 - k^2))`` and ``h0 = k / (1 - sqrt(1 - k^2))`` with ``k = q/||Q||``."""
    if not (r0 > 0 and q > 0 and q_norm > 0):
        raise DomainError("r0, q and ||Q|| must be positive")
    if q > q_norm * (1 + 1e-15):
        raise DomainError(f"q = {q} exceeds ||Q|| = {q_norm}")
    k = q / q_norm
    root = math.sqrt(max(0.0, 1.0 - k * k))
    if k >= 1.0 or root == 0.0:
        raise DegenerateGeometryError("q = ||Q||: delta0 = r0 and h0 = 1, which is not admissible")
    delta0 = r0 * (1.0 - root)
    h0 = k / (1.0 - root)
    assert delta0 < r0 and h0 > 1.0
    return delta0, h0


def _candidate_corners(domain, cone, t, y, gens_at, step, max_dist):
    """Ray landings for every face generator plus slice vertices (polyhedral domains)."""
    cands = []
    if isinstance(cone, FiniteGenerators) or isinstance(domain, (MovingBox, MovingConvexPolytope)):
        if isinstance(domain, MovingBox) and domain.dim == 2:
            g, h = domain.bounds(t)
            cands.extend(np.array([[g[0], g[1]], [h[0], g[1]], [h[0], h[1]], [g[0], h[1]]]))
        elif isinstance(domain, MovingConvexPolytope):
            try:
                cands.extend(domain.vertices(t))
            except GeometryError:
                pass
        for G in gens_at:
            for gamma in G:
                try:
                    cands.append(domain.ray_hit(t, y, gamma, step, max_dist))
                except ProjectionError:
                    continue
    return cands


def oblique_project(domain: TimeDependentDomain, cone: ConeField, t: float, y,
                    budget: GeometryBudget | None = None, *, delta0: float | None = None,
                    h0: float | None = None, enforce_budget: bool = True,
                    tol: float = 1e-12, max_iter: int = 200) -> ProjectionResult:
    """Project ``y`` onto ``dD_t`` along ``Gamma_t``.

    Points of the closure are returned unchanged.  Otherwise the search starts
    from the closest boundary point and repeatedly shoots a ray from ``y``
    along the generator at the current landing point until the landing point
    stops moving.  Raises :class:`BudgetError` when ``d(y, D_t) >= delta0``
    (if enforced) and :class:`GoodProjectionViolated` when the result is
    longer than ``h0 * d(y, D_t)``.
    """
    y = np.asarray(y, dtype=float)
    if budget is not None:
        delta0 = budget.delta0 if delta0 is None else delta0
        h0 = budget.h0 if h0 is None else h0
    if domain.classify(t, y[None])[0] >= 0:
        return ProjectionResult(y.copy(), None, 0.0, 0, 0.0)
    p = domain.closest_boundary_point(t, y[None])[0]
    dist = float(np.linalg.norm(p - y))
    if enforce_budget and delta0 is not None and dist >= delta0:
        raise BudgetError(f"d(y, D_t) = {dist:.6g} >= delta0 = {delta0:.6g}")
    iterations = 0
    if isinstance(cone, NormalCone):
        point, direction = p, (p - y) / dist
    else:
        step = (delta0 if delta0 is not None and math.isfinite(delta0) else 8.0 * dist) / 8.0
        step = min(step, max(dist, 1e-12))
        reach = 4.0 * max(h0 or 1.0, 1.0) * dist + step
        point, direction = None, None
        visited = []
        for iterations in range(1, max_iter + 1):
            G = cone.generators(domain, t, p)
            if cone_contains(G, p - y):
                point = p
                direction = G[0] if G.shape[0] == 1 else _unit(p - y)
                break
            if G.shape[0] > 1:
                break
            q = domain.ray_hit(t, y, G[0], step, reach)
            moved = float(np.linalg.norm(q - p))
            visited.append(q)
            if moved < tol * max(1.0, float(np.linalg.norm(q))):
                G = cone.generators(domain, t, q)
                if cone_contains(G, q - y, tol=1e-6):
                    point, direction = q, G[0]
                break
            if len(visited) > 2 and np.linalg.norm(visited[-1] - visited[-3]) < 1e-9:
                p = 0.5 * (visited[-1] + visited[-2])
                p = domain.closest_boundary_point(t, p[None])[0]
            else:
                p = q
        if point is None:
            gens_at = [cone.generators(domain, t, p)]
            best = None
            for c in _candidate_corners(domain, cone, t, y, gens_at, step, reach):
                try:
                    Gc = cone.generators(domain, t, c)
                except GeometryError:
                    continue
                if cone_contains(Gc, c - y, tol=1e-6):
                    if best is None or np.linalg.norm(c - y) < np.linalg.norm(best - y):
                        best = c
            if best is None:
                raise ProjectionError(f"oblique projection of {y} did not converge at t={t}")
            point = best
            Gb = cone.generators(domain, t, best)
            direction = Gb[0] if Gb.shape[0] == 1 else _unit(best - y)
    stretch = float(np.linalg.norm(point - y))
    if h0 is not None and stretch > h0 * dist * (1.0 + 1e-9) + 1e-12:
        raise GoodProjectionViolated(
            f"|y - pi(y)| = {stretch:.6g} > h0 * d(y, D_t) = {h0 * dist:.6g}")
    return ProjectionResult(point, np.asarray(direction, float), stretch, iterations, dist)


def project_many(domain, cone, t, Y, budget=None, **kw) -> np.ndarray:
    """Vectorised projection for normal cones on smooth or box domains, else a loop."""
    Y = np.asarray(Y, float)
    out = Y.copy()
    outside = domain.classify(t, Y) < 0
    if not np.any(outside):
        return out
    if isinstance(cone, NormalCone) and isinstance(domain, (MovingBall, MovingAnnulus, MovingBox,
                                                            MovingRoundedBox)):
        P = domain.closest_boundary_point(t, Y[outside])
        if budget is not None and kw.get("enforce_budget", True):
            dist = np.linalg.norm(P - Y[outside], axis=1)
            if np.any(dist >= budget.delta0):
                raise BudgetError(f"d(y, D_t) = {dist.max():.6g} >= delta0 = {budget.delta0:.6g}")
        out[outside] = P
        return out
    for i in np.flatnonzero(outside):
        out[i] = oblique_project(domain, cone, t, Y[i], budget, **kw).point
    return out


# -- budget measurement --------------------------------------------------------------


@dataclass
class BudgetMeasurement:
    budget: GeometryBudget
    a_values: np.ndarray = field(repr=False)
    e_values: np.ndarray = field(repr=False)
    anchors: int = 0


def _outward_samples(domain, cone, t, spacing, delta0, count, seed):
    """Exterior points ``p - s n`` at distance ``s < delta0`` off boundary samples."""
    P = domain.boundary_samples(t, spacing)
    if P.shape[0] == 0:
        raise GeometryError(f"no boundary samples at t={t}")
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, P.shape[0], size=count)
    s = rng.uniform(0.0, delta0, size=count) * (1.0 - 1e-9)
    s = np.maximum(s, 1e-7 * delta0)
    pts = []
    for p, si in zip(P[idx], s):
        N = domain.normals(t, p)
        n = _unit(N.mean(axis=0))
        pts.append(p - si * n)
    return np.array(pts)


def measure_h0(domain, cone, delta0, times, spacing=0.02, count=400, seed=0) -> float:
    """Largest observed ``|y - pi(y)| / d(y, D_t)`` over exterior samples within ``delta0``."""
    worst = 1.0
    for j, t in enumerate(times):
        Y = _outward_samples(domain, cone, t, spacing, delta0, count, seed + j)
        dist = domain.distance(t, Y)
        for y, d in zip(Y, dist):
            if d <= 0 or d >= delta0:
                continue
            r = oblique_project(domain, cone, t, y, delta0=delta0, enforce_budget=False)
            worst = max(worst, r.stretch / d)
    return worst


@dataclass
class ProjectionAudit:
    """Outcome of projecting random exterior points of the ``delta0`` shell."""

    samples: int
    h0: float
    worst_ratio: float
    violations: int
    worst_point: np.ndarray | None = None
    worst_time: float | None = None

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_json(self) -> dict:
        return {"samples": self.samples, "h0": self.h0, "worst_ratio": self.worst_ratio,
                "violations": self.violations, "passed": self.passed,
                "worst_point": None if self.worst_point is None else self.worst_point.tolist(),
                "worst_time": self.worst_time}


def shell_samples(domain, t, delta0, count, seed):
    """``count`` uniform points ``y`` with ``0 < d(y, D_t) < delta0`` by rejection from a box."""
    lo, hi = domain.bounding_box(t)
    lo, hi = np.asarray(lo, float) - delta0, np.asarray(hi, float) + delta0
    rng = np.random.default_rng(seed)
    found, total, draws = [], 0, 0
    while total < count:
        Y = rng.uniform(lo, hi, size=(max(4 * count, 1024), lo.size))
        Y = Y[domain.classify(t, Y) < 0]
        if Y.shape[0]:
            d = domain.distance(t, Y)
            Y = Y[(d > 0) & (d < delta0)]
        found.append(Y)
        total += Y.shape[0]
        draws += 1
        if draws > 200:
            raise GeometryError(f"could not sample the exterior shell at t={t}")
    return np.vstack(found)[:count]


def audit_good_projection(domain, cone, delta0: float, h0: float, *, count: int = 10_000,
                          times=None, seed: int = 0, slack: float = 1e-9) -> ProjectionAudit:
    """Check ``|y - pi(y)| <= h0 d(y, D_t)`` on ``count`` points of the exterior shell.

    Points are split evenly over ``times`` (default: five times on ``[0, T]``,
    or ``t = 0`` for a static domain).  The projection is run without its own
    ``h0`` guard so the ratio is measured rather than enforced.
    """
    if times is None:
        times = [0.0] if domain.time_independent else list(np.linspace(0.0, domain.horizon, 5))
    per = [count // len(times) + (1 if i < count % len(times) else 0) for i in range(len(times))]
    worst, bad, arg, arg_t = 0.0, 0, None, None
    for j, (t, m) in enumerate(zip(times, per)):
        Y = shell_samples(domain, t, delta0, m, seed + j)
        P = project_many(domain, cone, t, Y, delta0=delta0, h0=math.inf, enforce_budget=False)
        ratio = np.linalg.norm(P - Y, axis=1) / domain.distance(t, Y)
        k = int(np.argmax(ratio))
        if ratio[k] > worst:
            worst, arg, arg_t = float(ratio[k]), Y[k], float(t)
        bad += int(np.sum(ratio > h0 * (1.0 + slack)))
    return ProjectionAudit(int(sum(per)), h0, worst, bad, arg, arg_t)


def measure_budget(domain: TimeDependentDomain, cone: ConeField, *, r0: float | None = None,
                   rho0: float, eta0: float, delta0: float | None = None, h0: float | None = None,
                   resolution: Resolution | None = None, anchor_times: int = 5,
                   anchor_spacing: float | None = None, l_depth: int = 20) -> BudgetMeasurement:
    """Measure ``a``, ``e``, ``l`` (and ``delta0``, ``h0`` if not given) on a boundary lattice."""
    res = resolution or Resolution()
    if r0 is None:
        r0 = domain.exterior_radius
        if r0 is None:
            raise GeometryError("exterior-sphere radius unknown; pass r0 explicitly")
    T = domain.horizon
    times = [0.0] if domain.time_independent else list(np.linspace(0.0, T, anchor_times))
    spacing = anchor_spacing or max(rho0, res.spacing)
    a_vals, e_vals = [], []
    for s in times:
        for z in domain.boundary_samples(s, spacing):
            a_sz = quantity_a(domain, cone, s, z, rho0, eta0, res)
            c_sz = quantity_c(domain, cone, s, z, rho0, eta0, res)
            a_vals.append(a_sz)
            e_vals.append(quantity_e(a_sz, c_sz) if a_sz > 0 else math.inf)
    a_vals, e_vals = np.array(a_vals), np.array(e_vals)
    radii, values = modulus_table(domain, dyadic_radii(T, l_depth), res)
    notes = {"resolution": res.to_json(), "anchors": int(a_vals.size),
             "anchor_spacing": spacing, "anchor_times": len(times)}
    q = cone.q_ratio(T)
    if delta0 is None or h0 is None:
        if not isinstance(cone, NormalCone) and q is not None and q < 1.0 and math.isfinite(r0):
            d_formula, h_formula = good_projection_constants(r0, q, 1.0)
            notes["delta0_formula"] = d_formula
            delta0 = delta0 if delta0 is not None else min(d_formula, 0.5 * rho0)
            h0 = h0 if h0 is not None else h_formula
        elif not isinstance(cone, NormalCone) and q is not None and q < 1.0:
            # convex slices: the exterior-sphere condition holds for every r0,
            # and h0 does not depend on r0
            delta0 = delta0 if delta0 is not None else 0.5 * rho0
            h0 = h0 if h0 is not None else good_projection_constants(1.0, q, 1.0)[1]
        else:
            delta0 = delta0 if delta0 is not None else 0.5 * rho0
            if h0 is None:
                measured = measure_h0(domain, cone, delta0, times[:2])
                notes["h0_measured"] = measured
                h0 = max(measured, 1.0) * (1.0 + 1e-3)
    budget = GeometryBudget(
        r0=float(r0), rho0=float(rho0), eta0=float(eta0), a=float(a_vals.min()),
        e=float(e_vals.max()), delta0=float(delta0), h0=float(h0),
        l_radii=(0.0,) + tuple(map(float, radii)), l_values=(0.0,) + tuple(map(float, values)),
        convex_slices=bool(domain.convex), notes=notes)
    return BudgetMeasurement(budget, a_vals, e_vals, int(a_vals.size))
