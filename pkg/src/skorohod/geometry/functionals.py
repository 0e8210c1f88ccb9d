"""Sampled geometric functionals: temporal moduli, Hausdorff distance, normals."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.spatial.distance import directed_hausdorff

from ..errors import DomainError, GeometryError
from .domains import Membership, TimeDependentDomain
from .sampling import Resolution


def _time_pairs(horizon: float, r: float, res: Resolution):
    """Candidate ``(s, t)`` pairs with ``|s - t| <= r``; both orders included."""
    base = np.unique(np.concatenate((np.linspace(0.0, horizon, res.time_samples),
                                     [min(r, horizon), max(horizon - r, 0.0)])))
    gaps = np.linspace(0.0, r, res.gap_samples + 1)[1:]
    pairs = []
    for g in gaps:
        for s in base:
            for t in (s + g, s - g):
                if 0.0 <= t <= horizon:
                    pairs.append((float(s), float(t)))
    return pairs


def _sampled_l_pair(domain: TimeDependentDomain, s: float, t: float, spacing: float) -> float:
    pts = domain.closure_samples(s, spacing)
    outside = domain.psi(t, pts) < 0
    if not np.any(outside):
        return 0.0
    return float(np.max(domain.distance(t, pts[outside])))


def _sampled_lhat_pair(domain: TimeDependentDomain, s: float, t: float, spacing: float) -> float:
    pts = domain.boundary_samples(s, spacing)
    if pts.size == 0:
        raise GeometryError(f"no boundary samples found at t={s}")
    return float(np.max(domain.boundary_distance(t, pts)))


def _sup_over_pairs(domain, r, res, pair_value):
    if not 0.0 <= r <= domain.horizon + 1e-12:
        raise DomainError(f"time gap {r} outside [0, T]")
    if r == 0.0 or domain.time_independent:
        return 0.0
    best, arg = -np.inf, None
    for s, t in _time_pairs(domain.horizon, r, res):
        v = pair_value(s, t)
        if v > best:
            best, arg = v, (s, t)
    if res.refine and arg is not None:
        s0, t0 = arg
        gap = t0 - s0
        lo = max(0.0, -gap, s0 - domain.horizon / max(res.time_samples - 1, 1))
        hi = min(domain.horizon, domain.horizon - gap, s0 + domain.horizon / max(res.time_samples - 1, 1))
        if hi > lo:
            opt = minimize_scalar(lambda s: -pair_value(s, s + gap), bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-10})
            best = max(best, -float(opt.fun))
    return max(best, 0.0)


def modulus_l(domain: TimeDependentDomain, r: float, resolution: Resolution | None = None) -> float:
    """Sampled ``l(r) = sup_{|s-t|<=r} sup_{z in closure(D_s)} d(z, D_t)``.

    Builtin families evaluate the inner sup in closed form; other domains
    sample the closure of ``D_s`` with the resolution's spacing.
    """
    res = resolution or Resolution()

    def pair(s, t):
        v = domain.l_pair(s, t)
        return v if v is not None else _sampled_l_pair(domain, s, t, res.spacing)

    return _sup_over_pairs(domain, r, res, pair)


def boundary_modulus_lhat(domain: TimeDependentDomain, r: float,
                          resolution: Resolution | None = None) -> float:
    """Sampled ``sup_{|s-t|<=r} sup_{z in dD_s} d(z, dD_t)``."""
    res = resolution or Resolution()

    def pair(s, t):
        v = domain.lhat_pair(s, t)
        return v if v is not None else _sampled_lhat_pair(domain, s, t, res.spacing)

    return _sup_over_pairs(domain, r, res, pair)


def modulus_table(domain: TimeDependentDomain, radii, resolution: Resolution | None = None):
    """``l`` on a list of gaps, forced nondecreasing (``l`` is monotone by definition)."""
    radii = np.asarray(sorted(radii), dtype=float)
    values = np.array([modulus_l(domain, r, resolution) for r in radii])
    return radii, np.maximum.accumulate(values)


def holder_exponent(domain: TimeDependentDomain, radii=None,
                    resolution: Resolution | None = None) -> tuple[float, np.ndarray, np.ndarray]:
    """Least-squares slope of ``log l(r)`` against ``log r``.

    ``radii`` defaults to eight octaves ending at ``T / 8``.  Returns the
    slope together with the radii and the sampled ``l`` values; radii with
    ``l(r) = 0`` are dropped from the fit.
    """
    if radii is None:
        radii = domain.horizon * 2.0 ** -np.arange(10, 2, -1)
    radii, values = modulus_table(domain, radii, resolution)
    keep = values > 0
    if keep.sum() < 2:
        raise GeometryError("need at least two radii with l(r) > 0 to fit an exponent")
    slope = np.polyfit(np.log(radii[keep]), np.log(values[keep]), 1)[0]
    return float(slope), radii, values


def hausdorff(E, F) -> float:
    """Symmetric Hausdorff distance between two finite point samples."""
    E = np.atleast_2d(np.asarray(E, dtype=float))
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if E.shape[0] == 1 and E.shape[1] != F.shape[1]:
        E = E.T
    if F.shape[0] == 1 and F.shape[1] != E.shape[1]:
        F = F.T
    if E.size == 0 or F.size == 0:
        raise GeometryError("Hausdorff distance of an empty sample")
    return float(max(directed_hausdorff(E, F)[0], directed_hausdorff(F, E)[0]))


def inward_normal_cone(domain: TimeDependentDomain, t: float, z) -> np.ndarray:
    """Unit generators of the inward normal cone at the boundary point ``z``."""
    z = np.asarray(z, dtype=float)
    if domain.membership(t, z) is not Membership.BOUNDARY:
        raise GeometryError(f"point {z} is not on the boundary of D_{t}")
    return domain.normals(t, z)


@dataclass(frozen=True)
class ExteriorSphereReport:
    holds: bool
    worst_value: float
    witness: np.ndarray
    samples: int


def exterior_sphere_check(domain: TimeDependentDomain, t: float, z, n, r0: float,
                          spacing: float = 0.01, tol: float = 1e-9) -> ExteriorSphereReport:
    """Test ``<n, y - z> + |y - z|**2 / (2 r0) >= 0`` on closure samples ``y``."""
    z = np.asarray(z, dtype=float)
    n = np.asarray(n, dtype=float)
    ys = domain.closure_samples(t, spacing)
    diff = ys - z
    vals = diff @ n + np.sum(diff * diff, axis=1) / (2.0 * r0)
    k = int(np.argmin(vals))
    return ExteriorSphereReport(bool(vals[k] >= -tol), float(vals[k]), ys[k], ys.shape[0])
