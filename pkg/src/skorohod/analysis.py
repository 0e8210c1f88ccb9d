"""Estimate constants, a-priori bound checks and a 1-D reference solver."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, GeometryError
from .geometry import GeometryBudget, MovingBox
from .paths import DEFAULT_TOL, SampledCadlagPath, TimeGrid, _diameter, oscillation

SLACK = 1e-9


def k_constants(a: float, e: float) -> tuple[float, float, float, float]:
    """Constants ``(K1, K2, K3, K4)`` of the local estimates."""
    if not a > 0:
        raise DomainError(f"need a > 0, got {a}")
    if not 0 <= e < 1:
        raise DomainError(f"need 0 <= e < 1, got {e}")
    k1 = (a + 2 * a * a * e + 2 + a * e) / (a * (1 - e))
    k2 = (2 * a * a * e + 2 + a * e) / (a * (1 - e))
    return k1, k2, (1 + k1) / a, (1 + k2) / a


# -- epochs -------------------------------------------------------------------------


@dataclass(frozen=True)
class Epoch:
    """Window ``[T_i, T^_i)`` between a boundary hit and the next excursion.

    ``first``/``last`` are the node indices the local estimates apply to.
    """

    start: float
    end: float
    first: int
    last: int

    def to_json(self) -> dict:
        return {"start": self.start, "end": self.end, "first": self.first, "last": self.last}


def epoch_decomposition(solution, budget: GeometryBudget) -> list[Epoch]:
    """Alternate boundary-hit times ``T_i`` and escape times ``T^_i`` of the discrete path.

    ``T_{i+1}`` is the first node at or after ``T^_i`` where ``x`` sits on the
    boundary.  ``T^_{i+1}`` is the first node in ``[T_{i+1}, (T_{i+1} + eta0) ^ T)``
    with ``|x_t - x_{T_{i+1}}| + l(t - T_{i+1}) + l(mesh) >= rho0``, else
    ``(T_{i+1} + eta0) ^ T``.  A path that never touches the boundary yields
    the single epoch ``[0, T]``.
    """
    times = solution.grid.times
    x = solution.x.values
    bnd = np.asarray(solution.on_boundary, bool)
    n = times.size - 1
    T = float(times[-1])
    if not bnd.any():
        return [Epoch(0.0, T, 0, n)]
    l_mesh = budget.l(solution.grid.mesh)
    epochs = []
    hat = 0
    while hat <= n:
        hits = np.flatnonzero(bnd[hat:])
        if hits.size == 0:
            break
        j = hat + int(hits[0])
        limit = min(float(times[j]) + budget.eta0, T)
        m = j
        excursion = False
        while m <= n and times[m] < limit:
            if np.linalg.norm(x[m] - x[j]) + budget.l(times[m] - times[j]) + l_mesh >= budget.rho0:
                excursion = True
                break
            m += 1
        end = float(times[m]) if excursion else limit
        epochs.append(Epoch(float(times[j]), end, j, max(m - 1, j)))
        if m <= j or m >= n:
            break
        hat = m
    return epochs


# -- a-priori estimates --------------------------------------------------------------


@dataclass
class WindowCheck:
    t1: float
    t2: float
    epoch: int
    osc_w: float
    l_gap: float
    x_lhs: float
    x_rhs: float
    tv_lhs: float
    tv_rhs: float

    @property
    def passed(self) -> bool:
        return self.x_lhs <= self.x_rhs + SLACK and self.tv_lhs <= self.tv_rhs + SLACK

    def to_json(self) -> dict:
        return {"t1": self.t1, "t2": self.t2, "epoch": self.epoch,
                "lhs": {"x": self.x_lhs, "tv": self.tv_lhs},
                "rhs": {"x": self.x_rhs, "tv": self.tv_rhs}, "pass": self.passed}


@dataclass
class EstimateReport:
    windows: list
    constants: dict
    ratios: dict
    epochs: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(w.passed for w in self.windows)

    @property
    def failures(self) -> list:
        return [w for w in self.windows if not w.passed]

    def to_json(self) -> dict:
        return {"windows": [w.to_json() for w in self.windows], "constants": self.constants,
                "ratios": self.ratios, "epochs": [e.to_json() for e in self.epochs],
                "passed": self.passed}


def dyadic_windows(first: int, last: int, depth: int = 6):
    """Index windows of the full range and its dyadic subdivisions up to ``depth``."""
    out = {(first, last)}
    span = last - first
    for level in range(1, depth + 1):
        parts = 2**level
        if parts > span:
            break
        cuts = [first + (span * i) // parts for i in range(parts + 1)]
        out.update((lo, hi) for lo, hi in zip(cuts, cuts[1:]) if hi > lo)
    return sorted(out)


def check_apriori(problem, solution, depth: int = 6, l_read=None) -> EstimateReport:
    """Check the two local estimates on every dyadic window inside each epoch.

    The oscillation of the underlying driver ``w`` is used on the right-hand
    side; ``l`` is read from the budget table at the largest tabulated gap
    not exceeding the window (a lower bracket), so a passing window is
    certified by the tabulated values.  Empirical ratios
    ``lhs / (osc(w) + l(t2 - t1) + l(mesh))`` are reported over dyadic
    windows of the whole horizon.
    """
    budget = problem.budget
    l_read = l_read or budget.l_lower
    k1, k2, k3, k4 = k_constants(budget.a, budget.e)
    times = solution.grid.times
    x = solution.x.values
    tv = solution.reflection.total_variation
    w = problem.driver
    l_mesh = l_read(solution.grid.mesh)
    epochs = epoch_decomposition(solution, budget)

    def measures(lo, hi):
        t1, t2 = float(times[lo]), float(times[hi])
        osc_w = oscillation(w, t1, t2)
        lg = l_read(t2 - t1)
        return t1, t2, osc_w, lg, _diameter(x[lo:hi + 1]), float(tv[hi] - tv[lo])

    windows = []
    for i, ep in enumerate(epochs):
        for lo, hi in dyadic_windows(ep.first, ep.last, depth):
            t1, t2, osc_w, lg, dx, dtv = measures(lo, hi)
            windows.append(WindowCheck(t1, t2, i, osc_w, lg, dx, k1 * osc_w + k2 * (lg + l_mesh),
                                       dtv, k3 * osc_w + k4 * (lg + l_mesh)))
    r_x, r_tv = 0.0, 0.0
    for lo, hi in dyadic_windows(0, times.size - 1, depth):
        _, _, osc_w, lg, dx, dtv = measures(lo, hi)
        denom = osc_w + lg + l_mesh
        if denom > 0:
            r_x, r_tv = max(r_x, dx / denom), max(r_tv, dtv / denom)
    constants = {"a": budget.a, "e": budget.e, "K1": k1, "K2": k2, "K3": k3, "K4": k4,
                 "l_mesh": l_mesh, "mesh": solution.grid.mesh, "rho0": budget.rho0,
                 "eta0": budget.eta0, "depth": depth}
    return EstimateReport(windows, constants, {"x": r_x, "tv": r_tv}, epochs)


def ratio_stability(reports, threshold: float = 0.2) -> dict:
    """Relative variation of the empirical ratios across the last two reports."""
    if len(reports) < 2:
        return {"stable": True, "variation": {}}
    a, b = reports[-2].ratios, reports[-1].ratios
    var = {}
    for key in a:
        hi = max(a[key], b[key])
        var[key] = 0.0 if hi == 0 else abs(a[key] - b[key]) / hi
    return {"stable": all(v < threshold for v in var.values()), "variation": var}


# -- jump transfer -------------------------------------------------------------------


@dataclass
class JumpReport:
    factor: float
    slack: float
    x_excess: np.ndarray
    tv_excess: np.ndarray

    @property
    def violations(self) -> list:
        bad_x = np.flatnonzero(self.x_excess > SLACK)
        bad_tv = np.flatnonzero(self.tv_excess > SLACK)
        return ([f"x jump exceeds bound at node {k + 1}" for k in bad_x]
                + [f"|lambda| jump exceeds bound at node {k + 1}" for k in bad_tv])

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"factor": self.factor, "slack": self.slack,
                "max_x_excess": float(self.x_excess.max(initial=-np.inf)),
                "max_tv_excess": float(self.tv_excess.max(initial=-np.inf)),
                "violations": self.violations}


def jump_bound_check(problem, solution) -> JumpReport:
    """``|dx| <= |dw| / sqrt(1 - e) + h0 l(mesh)`` and the same for ``d|lambda|``, per step."""
    b = problem.budget
    factor = 1.0 / math.sqrt(1.0 - b.e)
    slack = b.h0 * b.l(solution.grid.mesh)
    dw = np.linalg.norm(np.diff(solution.driver.values, axis=0), axis=1)
    dx = np.linalg.norm(np.diff(solution.x.values, axis=0), axis=1)
    dtv = np.diff(solution.reflection.total_variation)
    bound = factor * dw + slack
    return JumpReport(factor, slack, dx - bound, dtv - bound)


# -- 1-D reference solutions ---------------------------------------------------------


def one_sided_reflection(w, floor):
    """``x = w + max(0, max_{s <= t} (g_s - w_s))`` on nodes (lower barrier only)."""
    w = np.asarray(w, float).reshape(-1)
    g = np.asarray(floor, float).reshape(-1)
    return w + np.maximum(0.0, np.maximum.accumulate(g - w))


def one_sided_reflection_upper(w, ceiling):
    """Upper-barrier counterpart: ``x = w - max(0, max_{s <= t} (w_s - h_s))``."""
    return -one_sided_reflection(-np.asarray(w, float), -np.asarray(ceiling, float))


@dataclass
class OracleResult:
    x: SampledCadlagPath
    variation: np.ndarray
    formula_gap: float | None


def oracle_1d(domain: MovingBox, driver: SampledCadlagPath, level: int = 16) -> OracleResult:
    """Reference solution on a 1-D moving interval by clipping on a dyadic grid.

    The recursion ``x_k = clip(x_{k-1} + w_k - w_{k-1}, g(t_k), h(t_k))`` is run
    at ``2**level`` steps.  When only one barrier is ever active the explicit
    one-sided formula is evaluated too and its grid-sup gap is reported.
    """
    if not isinstance(domain, MovingBox) or domain.dim != 1:
        raise GeometryError("the 1-D oracle needs a one-dimensional interval domain")
    grid = TimeGrid.dyadic(domain.horizon, level)
    t = grid.times
    g = np.array([float(domain.lower[0](s)) for s in t])
    h = np.array([float(domain.upper[0](s)) for s in t])
    if np.any(g >= h):
        raise GeometryError("interval degenerates: floor >= ceiling")
    w = driver(t)[:, 0].astype(float).copy()
    w[-1] = driver.values[-1, 0]
    x = np.empty_like(w)
    tv = np.zeros_like(w)
    x[0] = w[0]
    lower_hit = upper_hit = False
    for k in range(1, w.size):
        c = x[k - 1] + (w[k] - w[k - 1])
        if c < g[k]:
            x[k], lower_hit = g[k], True
        elif c > h[k]:
            x[k], upper_hit = h[k], True
        else:
            x[k] = c
        tv[k] = tv[k - 1] + abs(x[k] - c)
    gap = None
    if lower_hit and not upper_hit:
        gap = float(np.abs(one_sided_reflection(w, g) - x).max())
    elif upper_hit and not lower_hit:
        gap = float(np.abs(one_sided_reflection_upper(w, h) - x).max())
    elif not lower_hit and not upper_hit:
        gap = float(np.abs(w - x).max())
    return OracleResult(SampledCadlagPath(grid, x), tv, gap)


def grid_sup_distance(coarse: SampledCadlagPath, fine: SampledCadlagPath) -> float:
    """``sup`` over the fine nodes of ``|coarse(t) - fine(t)|``."""
    return float(np.linalg.norm(coarse(fine.times) - fine.values, axis=1).max())
