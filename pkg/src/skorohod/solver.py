"""Discrete Skorohod solver on frozen time slices.

On a partition ``0 = tau_0 < ... < tau_N = T`` the driver is replaced by its
step approximation and the domain is frozen on each interval.  At every node
the candidate ``x_{k-1} + w_k - w_{k-1}`` is kept when it lies in the closed
slice and otherwise projected onto the boundary along the reflection cone.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ProjectionError, SolverError
from .geometry import GeometryBudget, TimeDependentDomain
from .paths import (DEFAULT_TOL, ReflectionRecord, SampledCadlagPath, TimeGrid, max_jump,
                    step_oscillations)
from .reflection import ANGLE_TOL, ConeField, cone_contains, oblique_project

# Tolerance of the node-wise identity x = w + lambda, relative to the path scale.
ADDITIVITY_TOL = 1e-12


@dataclass(frozen=True)
class SkorohodProblem:
    """Domain, cone field, driver ``w`` and the validated geometry budget."""

    domain: TimeDependentDomain
    cone: ConeField
    driver: SampledCadlagPath
    budget: GeometryBudget

    def __post_init__(self):
        if self.driver.dim != self.domain.dim:
            raise DomainError(f"driver dimension {self.driver.dim} != domain dimension {self.domain.dim}")
        if abs(self.driver.horizon - self.domain.horizon) > 1e-12 * max(1.0, self.domain.horizon):
            raise DomainError("driver and domain horizons differ")
        if not bool(self.domain.in_closure(0.0, self.driver.values[:1])[0]):
            raise DomainError(f"w_0 = {self.driver.values[0]} is not in the closure of D_0")

    @property
    def horizon(self) -> float:
        return self.domain.horizon

    @property
    def driver_jump(self) -> float:
        return max_jump(self.driver)

    @property
    def driver_admissible(self) -> bool:
        """Jumps below ``delta0/4 ^ rho0/(4 h0)``, waived for convex slices."""
        return self.budget.convex_slices or self.driver_jump < self.budget.jump_cap


@dataclass
class AdmissibilityReport:
    """Per-interval margins of the two step-size conditions.

    ``projection_margin[k] = delta0 - (|w^D_k - w^D_{k-1}| + l(mesh))`` and
    ``step_margin[k] = min(delta0/2, rho0/(2 h0)) - (osc_k(w) + l(mesh))``.
    """

    mesh: float
    l_mesh: float
    projection_margin: np.ndarray
    step_margin: np.ndarray
    driver_jump: float
    jump_cap: float
    waived: bool

    @property
    def driver_admissible(self) -> bool:
        return self.waived or self.driver_jump < self.jump_cap

    @property
    def passed(self) -> bool:
        if self.waived:
            return True
        return (self.driver_admissible and bool(np.all(self.projection_margin > 0))
                and bool(np.all(self.step_margin > 0)))

    @property
    def first_failure(self):
        bad = np.flatnonzero((self.projection_margin <= 0) | (self.step_margin <= 0))
        return int(bad[0]) + 1 if bad.size else None

    @property
    def suggestion(self) -> str:
        if self.passed:
            return "admissible"
        if not self.driver_admissible:
            return (f"driver-inadmissible: jump {self.driver_jump:.6g} >= cap {self.jump_cap:.6g}; "
                    "refinement cannot help")
        return "refine the mesh: the margins improve as the mesh shrinks"

    def to_json(self) -> dict:
        return {
            "passed": self.passed, "waived": self.waived, "mesh": self.mesh, "l_mesh": self.l_mesh,
            "min_projection_margin": float(self.projection_margin.min()),
            "min_step_margin": float(self.step_margin.min()),
            "driver_jump": self.driver_jump, "jump_cap": self.jump_cap,
            "driver_admissible": self.driver_admissible, "first_failure": self.first_failure,
            "suggestion": self.suggestion,
        }


@dataclass
class Diagnostics:
    distances: np.ndarray
    stretches: np.ndarray
    admissibility: AdmissibilityReport
    violations: list = field(default_factory=list)
    tolerance: float = DEFAULT_TOL
    seconds: float = 0.0

    def to_json(self) -> dict:
        pushed = self.stretches > 0
        return {
            "steps": int(self.distances.size),
            "pushes": int(pushed.sum()),
            "max_projection_distance": float(self.distances.max(initial=0.0)),
            "max_stretch": float(self.stretches.max(initial=0.0)),
            "admissibility": self.admissibility.to_json(),
            "violations": list(self.violations),
            "tolerance": self.tolerance,
            "seconds": self.seconds,
        }


@dataclass
class SkorohodSolution:
    x: SampledCadlagPath
    reflection: ReflectionRecord
    driver: SampledCadlagPath
    diagnostics: Diagnostics
    on_boundary: np.ndarray = None

    @property
    def grid(self) -> TimeGrid:
        return self.x.grid


def discretize_driver(w: SampledCadlagPath, grid: TimeGrid) -> tuple[SampledCadlagPath, np.ndarray]:
    """Step approximation ``w^D_t = w_{tau_{k-1}}`` on ``grid`` and per-interval oscillation of ``w``.

    The oscillation of the underlying ``w`` over each closed interval
    ``[tau_{k-1}, tau_k]`` is returned alongside for admissibility checks.
    """
    if abs(grid.horizon - w.horizon) > 1e-12 * max(1.0, w.horizon):
        raise DomainError("grid and driver horizons differ")
    values = w(grid.times)
    values = np.array(values, dtype=float)
    values[-1] = w.values[-1]
    return SampledCadlagPath(grid, values), step_oscillations(w, grid)


def admissibility_check(problem: SkorohodProblem, grid: TimeGrid) -> AdmissibilityReport:
    """Margins of the per-step size conditions on ``grid``."""
    b = problem.budget
    w_step, osc = discretize_driver(problem.driver, grid)
    l_mesh = b.l(grid.mesh)
    step_jump = np.linalg.norm(np.diff(w_step.values, axis=0), axis=1)
    return AdmissibilityReport(
        mesh=grid.mesh, l_mesh=l_mesh,
        projection_margin=b.delta0 - (step_jump + l_mesh),
        step_margin=b.step_cap - (osc + l_mesh),
        driver_jump=problem.driver_jump, jump_cap=b.jump_cap, waived=b.convex_slices,
    )


def solve(problem: SkorohodProblem, grid: TimeGrid, *, tol: float = DEFAULT_TOL,
          require_admissible: bool = True, validate: bool = True) -> SkorohodSolution:
    """Run the projection recursion on ``grid``.

    Raises :class:`SolverError` (carrying the step index) on an inadmissible
    step, a failed projection, or an ``x`` jump of size ``>= rho0``.
    """
    started = time.perf_counter()
    domain, cone, b = problem.domain, problem.cone, problem.budget
    report = admissibility_check(problem, grid)
    if require_admissible and not report.passed:
        raise SolverError(f"inadmissible partition: {report.suggestion}", step=report.first_failure)
    w_step, _ = discretize_driver(problem.driver, grid)
    w = w_step.values
    n, d = w.shape
    x = np.empty_like(w)
    lam = np.zeros_like(w)
    tv = np.zeros(n)
    gammas = np.full((n - 1, d), np.nan)
    distances = np.zeros(n - 1)
    stretches = np.zeros(n - 1)
    x[0] = w[0]
    enforce = not b.convex_slices
    times = grid.times
    for k in range(1, n):
        cand = x[k - 1] + (w[k] - w[k - 1])
        try:
            res = oblique_project(domain, cone, float(times[k]), cand, b, enforce_budget=enforce)
        except ProjectionError as exc:
            raise SolverError(str(exc), step=k) from exc
        x[k] = res.point
        if res.moved:
            push = res.point - cand
            size = float(np.linalg.norm(push))
            lam[k] = lam[k - 1] + push
            tv[k] = tv[k - 1] + size
            gammas[k - 1] = push / size
            distances[k - 1] = res.distance
            stretches[k - 1] = res.stretch
        else:
            lam[k] = lam[k - 1]
            tv[k] = tv[k - 1]
        if enforce and float(np.linalg.norm(x[k] - x[k - 1])) >= b.rho0:
            raise SolverError(f"x jump {np.linalg.norm(x[k] - x[k - 1]):.6g} >= rho0 = {b.rho0}", step=k)
    codes = np.array([domain.classify(float(t), xi[None])[0] for t, xi in zip(times, x)])
    solution = SkorohodSolution(
        x=SampledCadlagPath(grid, x),
        reflection=ReflectionRecord(grid, lam, tv, gammas),
        driver=w_step,
        diagnostics=Diagnostics(distances, stretches, report, tolerance=tol),
        on_boundary=codes == 0,
    )
    if validate:
        solution.diagnostics.violations = validate_solution(problem, solution, tol)
    solution.diagnostics.seconds = time.perf_counter() - started
    return solution


def validate_solution(problem: SkorohodProblem, solution: SkorohodSolution,
                      tol: float = DEFAULT_TOL) -> list[str]:
    """Discrete checks of the solution properties; an empty list means valid.

    Covers membership of ``x`` in the closed slices, ``x = w + lambda``, the
    reflection-record invariants, push directions inside the cone at the
    pushed point, pushes only from boundary points, and ``max_jump(x) < rho0``.
    """
    domain, cone, b = problem.domain, problem.cone, problem.budget
    grid = solution.grid
    x = solution.x.values
    w = solution.driver.values
    rec = solution.reflection
    problems = []
    times = grid.times
    codes = np.array([domain.classify(float(t), xi[None])[0] for t, xi in zip(times, x)])
    outside = np.flatnonzero(codes < 0)
    if outside.size:
        problems.append(f"SP1: x outside the closed slice at node {int(outside[0])}")
    scale = max(1.0, float(np.abs(w).max()), float(np.abs(rec.lam).max()))
    gap = np.abs(x - (w + rec.lam)).max()
    if gap > ADDITIVITY_TOL * scale * max(1.0, math.sqrt(grid.steps)):
        problems.append(f"SP1: x != w + lambda (max gap {gap:.3g})")
    problems.extend(f"record: {p}" for p in rec.check(tol))
    pushed = rec.pushed
    for k in np.flatnonzero(pushed):
        node = k + 1
        if codes[node] != 0:
            problems.append(f"SP4: |lambda| grows at node {node} but x is not on the boundary")
            break
        try:
            G = cone.generators(domain, float(times[node]), x[node])
        except Exception as exc:  # geometry can refuse points off the boundary
            problems.append(f"SP2: no cone at node {node}: {exc}")
            break
        if not cone_contains(G, rec.gammas[k], ANGLE_TOL):
            problems.append(f"SP2: push direction at node {node} is outside the cone")
            break
    if not b.convex_slices and max_jump(solution.x) >= b.rho0:
        problems.append(f"x jump {max_jump(solution.x):.6g} >= rho0 = {b.rho0}")
    return problems


@dataclass
class RefinementReport:
    levels: list
    x_gaps: list
    lambda_gaps: list

    @property
    def exceptions(self) -> int:
        g = self.x_gaps
        return sum(1 for i in range(1, len(g)) if g[i] > g[i - 1])

    @property
    def monotone(self) -> bool:
        """Gaps decrease with at most one exception."""
        return self.exceptions <= 1

    @property
    def orders(self) -> list:
        g = self.x_gaps
        return [math.log2(g[i - 1] / g[i]) if g[i] > 0 and g[i - 1] > 0 else math.inf
                for i in range(1, len(g))]

    @property
    def cauchy(self) -> bool:
        return self.monotone and (not self.x_gaps or self.x_gaps[-1] <= max(self.x_gaps))

    def to_json(self) -> dict:
        return {"levels": self.levels, "x_gaps": self.x_gaps, "lambda_gaps": self.lambda_gaps,
                "monotone": self.monotone, "exceptions": self.exceptions,
                "orders": [o if math.isfinite(o) else None for o in self.orders]}


def coarse_gap(fine: SampledCadlagPath, coarse: SampledCadlagPath) -> float:
    """Grid-sup distance of two paths evaluated at the coarse grid nodes."""
    return float(np.linalg.norm(fine(coarse.times) - coarse.values, axis=1).max())


def refine_solve(problem: SkorohodProblem, n_min: int, n_max: int, **kw):
    """Solve on dyadic levels ``n_min..n_max``; report consecutive-level gaps."""
    if n_max < n_min:
        raise DomainError("need n_min <= n_max")
    solutions = []
    for n in range(n_min, n_max + 1):
        try:
            solutions.append(solve(problem, TimeGrid.dyadic(problem.horizon, n), **kw))
        except SolverError as exc:
            raise type(exc)(f"level {n}: {exc.detail}", step=exc.step) from exc
    x_gaps, l_gaps = [], []
    for coarse, fine in zip(solutions, solutions[1:]):
        x_gaps.append(coarse_gap(fine.x, coarse.x))
        l_gaps.append(coarse_gap(fine.reflection.lambda_path(), coarse.reflection.lambda_path()))
    return solutions, RefinementReport(list(range(n_min, n_max + 1)), x_gaps, l_gaps)
