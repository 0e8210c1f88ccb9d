"""Projected Euler scheme for reflected SDEs in time-dependent domains.

On the dyadic grid ``t_k = k T / 2**n`` the unreflected accumulator is
``Z_{k+1} = Z_k + h b(t_k, X_k) + sigma(t_k, X_k) dW_k`` and the state is the
projection of ``X_k + (Z_{k+1} - Z_k)`` onto the slice at ``t_{k+1}``.  The
reflection term obeys ``Lambda_{k+1} = Lambda_k + X_{k+1} - X_k - (Z_{k+1} - Z_k)``.

Paths are simulated in vectorised batches; Wiener increments are keyed by
``(seed, path, step)`` so results do not depend on batching or threads.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, ProjectionError, StepRejected
from .geometry import GeometryBudget, TimeDependentDomain
from .paths import ReflectionRecord, SampledCadlagPath, TimeGrid
from .reflection import ConeField, project_many
from .rng import coarsen, normal_increments

IDENTITY_TOL = 1e-12


def _spectral_norm(sigma: np.ndarray) -> np.ndarray:
    return np.linalg.norm(sigma, ord=2, axis=(-2, -1))


@dataclass(frozen=True)
class SdeCoefficients:
    """Drift ``b(t, z)`` and diffusion ``sigma(t, z)`` with declared sup bounds.

    Both callables are vectorised: ``drift(t, Z)`` maps ``(P, d)`` to
    ``(P, d)`` and ``diffusion(t, Z)`` maps ``(P, d)`` to ``(P, d, m)``.
    """

    drift: object
    diffusion: object
    noise_dim: int
    drift_bound: float
    diffusion_bound: float
    spec: dict | None = field(default=None, compare=False)

    @classmethod
    def constant(cls, drift, sigma) -> "SdeCoefficients":
        b = np.atleast_1d(np.asarray(drift, float))
        s = np.asarray(sigma, float)
        if s.ndim == 0:
            s = s * np.eye(b.size)
        s = np.atleast_2d(s)
        if s.shape[0] != b.size:
            raise ConfigError(f"sigma has {s.shape[0]} rows for a {b.size}-dimensional drift")

        def drift_fn(t, Z):
            return np.broadcast_to(b, Z.shape)

        def diffusion_fn(t, Z):
            return np.broadcast_to(s, Z.shape[:-1] + s.shape)

        spec = {"drift": b.tolist(), "sigma": s.tolist()}
        return cls(drift_fn, diffusion_fn, s.shape[1], float(np.linalg.norm(b)),
                   float(np.linalg.norm(s, 2)), spec)

    @classmethod
    def from_json(cls, spec: dict, dim: int) -> "SdeCoefficients":
        if not isinstance(spec, dict):
            raise ConfigError("sde coefficients must be an object")
        drift = spec.get("drift", 0.0)
        sigma = spec.get("sigma", 0.0)
        b = np.full(dim, float(drift)) if np.isscalar(drift) else np.asarray(drift, float)
        if b.shape != (dim,):
            raise ConfigError(f"drift must have {dim} components")
        return cls.constant(b, float(sigma) if np.isscalar(sigma) else sigma)

    def to_json(self) -> dict:
        if self.spec is None:
            raise ConfigError("callable coefficients have no JSON form")
        return dict(self.spec)

    def check_bounds(self, domain: TimeDependentDomain, spacing: float = 0.05, times: int = 5) -> list:
        """Spot-check the declared bounds on closure samples."""
        problems = []
        for t in np.linspace(0.0, domain.horizon, times):
            Z = domain.closure_samples(float(t), spacing)
            nb = np.linalg.norm(self.drift(t, Z), axis=-1).max()
            ns = _spectral_norm(np.asarray(self.diffusion(t, Z))).max()
            if nb > self.drift_bound * (1 + 1e-12) + 1e-15:
                problems.append(f"|b| = {nb:.6g} exceeds the declared bound at t={t}")
            if ns > self.diffusion_bound * (1 + 1e-12) + 1e-15:
                problems.append(f"||sigma|| = {ns:.6g} exceeds the declared bound at t={t}")
        return problems


@dataclass
class ReflectedSdePath:
    X: SampledCadlagPath
    Z: SampledCadlagPath
    reflection: ReflectionRecord
    W: SampledCadlagPath
    seed: int
    path: int
    epsilon: float
    epsilon_bound: float
    violations: list = field(default_factory=list)


@dataclass
class _Batch:
    X: np.ndarray | None
    Z: np.ndarray | None
    Lam: np.ndarray | None
    TV: np.ndarray | None
    gammas: np.ndarray | None
    X_T: np.ndarray
    TV_T: np.ndarray
    epsilon: np.ndarray
    epsilon_bound: np.ndarray
    identity_gap: np.ndarray
    max_jump: np.ndarray
    outside: np.ndarray


def _thread_cap() -> int:
    raw = os.environ.get("SKOROHOD_THREADS")
    if raw is None:
        return min(4, os.cpu_count() or 1)
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"SKOROHOD_THREADS must be an integer, got {raw!r}") from None


def _simulate(coeffs: SdeCoefficients, domain: TimeDependentDomain, cone: ConeField, z0,
              grid: TimeGrid, dW: np.ndarray, budget: GeometryBudget | None,
              keep: bool, path_ids: np.ndarray) -> _Batch:
    P, N, m = dW.shape
    d = domain.dim
    times = grid.times
    h = float(grid.mesh)
    x = np.tile(np.asarray(z0, float), (P, 1))
    z = x.copy()
    lam = np.zeros((P, d))
    tv = np.zeros(P)
    eps = np.zeros(P)
    gap = np.zeros(P)
    jump = np.zeros(P)
    outside = np.zeros(P, dtype=bool)
    if keep:
        Xs, Zs, Ls = (np.empty((P, N + 1, d)) for _ in range(3))
        TVs = np.zeros((P, N + 1))
        G = np.full((P, N, d), np.nan)
        Xs[:, 0], Zs[:, 0], Ls[:, 0] = x, z, lam
    enforce = budget is not None and not budget.convex_slices
    l_h = budget.l(h) if budget is not None else 0.0
    for k in range(N):
        t = float(times[k])
        incr = h * coeffs.drift(t, x) + np.einsum("pij,pj->pi", coeffs.diffusion(t, x), dW[:, k])
        size = np.linalg.norm(incr, axis=1)
        if enforce:
            bad = np.flatnonzero(l_h + size >= budget.delta0)
            if bad.size:
                p = int(path_ids[bad[0]])
                raise StepRejected(
                    f"path {p}: l(h) + |dZ| = {l_h + size[bad[0]]:.6g} >= delta0 = {budget.delta0:.6g}",
                    step=k)
        eps = np.maximum(eps, size)
        z_next = z + incr
        cand = x + incr
        try:
            x_next = project_many(domain, cone, float(times[k + 1]), cand, budget,
                                  enforce_budget=enforce)
        except ProjectionError as exc:
            raise StepRejected(str(exc), step=k) from exc
        push = x_next - cand
        lam_next = lam + (x_next - x - (z_next - z))
        scale = np.maximum.reduce([np.ones(P), np.abs(x_next).max(1), np.abs(z_next).max(1),
                                   np.abs(lam_next).max(1)])
        resid = np.abs(lam_next - lam - push).max(1) / scale
        gap = np.maximum(gap, resid)
        push_size = np.linalg.norm(push, axis=1)
        tv = tv + push_size
        jump = np.maximum(jump, np.linalg.norm(x_next - x, axis=1))
        outside |= domain.classify(float(times[k + 1]), x_next) < 0
        if keep:
            Xs[:, k + 1], Zs[:, k + 1], Ls[:, k + 1], TVs[:, k + 1] = x_next, z_next, lam_next, tv
            moved = push_size > 0
            G[moved, k] = push[moved] / push_size[moved, None]
        x, z, lam = x_next, z_next, lam_next
    w_max = np.linalg.norm(dW, axis=2).max(axis=1)
    bound = coeffs.drift_bound * h + coeffs.diffusion_bound * w_max
    return _Batch(Xs if keep else None, Zs if keep else None, Ls if keep else None,
                  TVs if keep else None, G if keep else None, x, tv, eps, bound, gap, jump, outside)


def _path_violations(batch: _Batch, i: int, budget) -> list:
    out = []
    if batch.outside[i]:
        out.append("X left the closed slice")
    if batch.identity_gap[i] > IDENTITY_TOL:
        out.append(f"Lambda identity residual {batch.identity_gap[i]:.3g}")
    if batch.epsilon[i] > batch.epsilon_bound[i] * (1 + 1e-12) + 1e-15:
        out.append("epsilon bound exceeded")
    if budget is not None and not budget.convex_slices and batch.max_jump[i] >= budget.rho0:
        out.append(f"X jump {batch.max_jump[i]:.6g} >= rho0")
    return out


def _check_start(domain, z0):
    z0 = np.atleast_1d(np.asarray(z0, float))
    if z0.shape != (domain.dim,):
        raise DomainError(f"z0 must have {domain.dim} components")
    if not bool(domain.in_closure(0.0, z0[None])[0]):
        raise DomainError(f"z0 = {z0} is not in the closure of D_0")
    return z0


def euler_reflected(coeffs: SdeCoefficients, domain: TimeDependentDomain, cone: ConeField, z0,
                    n: int, seed: int, *, path: int = 0, budget: GeometryBudget | None = None,
                    increments: np.ndarray | None = None) -> ReflectedSdePath:
    """Simulate one path on the dyadic level ``n``.

    ``increments`` (shape ``(2**n, m)``) overrides the seeded Wiener
    increments, which is how coupled refinements share one Brownian path.
    """
    z0 = _check_start(domain, z0)
    grid = TimeGrid.dyadic(domain.horizon, n)
    if increments is None:
        dW = normal_increments(seed, [path], grid.steps, coeffs.noise_dim, grid.mesh)
    else:
        dW = np.asarray(increments, float).reshape(1, grid.steps, coeffs.noise_dim)
    b = _simulate(coeffs, domain, cone, z0, grid, dW, budget, True, np.array([path]))
    W = np.vstack((np.zeros((1, coeffs.noise_dim)), np.cumsum(dW[0], axis=0)))
    return ReflectedSdePath(
        X=SampledCadlagPath(grid, b.X[0]), Z=SampledCadlagPath(grid, b.Z[0]),
        reflection=ReflectionRecord(grid, b.Lam[0], b.TV[0], b.gammas[0]),
        W=SampledCadlagPath(grid, W), seed=seed, path=path,
        epsilon=float(b.epsilon[0]), epsilon_bound=float(b.epsilon_bound[0]),
        violations=_path_violations(b, 0, budget))


def coupled_gaps(coeffs, domain, cone, z0, n: int, seed: int, paths, *, budget=None) -> np.ndarray:
    """Per-path grid-sup distance between levels ``n`` and ``n + 1`` on shared Brownian paths.

    Level ``n`` is driven by the pairwise sums of the level ``n + 1`` increments.
    """
    z0 = _check_start(domain, z0)
    ids = np.atleast_1d(np.asarray(paths, dtype=np.int64))
    fine_grid = TimeGrid.dyadic(domain.horizon, n + 1)
    dW = normal_increments(seed, ids, fine_grid.steps, coeffs.noise_dim, fine_grid.mesh)
    fine = _simulate(coeffs, domain, cone, z0, fine_grid, dW, budget, True, ids)
    coarse = _simulate(coeffs, domain, cone, z0, TimeGrid.dyadic(domain.horizon, n), coarsen(dW),
                       budget, True, ids)
    return np.linalg.norm(fine.X[:, ::2] - coarse.X, axis=2).max(axis=1)


def coupled_gap(coeffs, domain, cone, z0, n: int, seed: int, *, path: int = 0, budget=None) -> float:
    """Grid-sup distance between levels ``n`` and ``n + 1`` driven by one Brownian path."""
    return float(coupled_gaps(coeffs, domain, cone, z0, n, seed, [path], budget=budget)[0])


STATISTICS = {
    "one": lambda X, TV: np.ones(X.shape[0]),
    "terminal": lambda X, TV: X[:, 0],
    "terminal_norm": lambda X, TV: np.linalg.norm(X, axis=1),
    "terminal_variation": lambda X, TV: TV,
}


@dataclass
class MonteCarloResult:
    mean: float
    se: float
    paths: int
    level: int
    seed: int
    stat: str
    max_epsilon_ratio: float
    max_identity_gap: float
    violations: int
    values: np.ndarray = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {"mean": self.mean, "se": self.se, "paths": self.paths, "level": self.level,
                "seed": self.seed, "stat": self.stat, "max_epsilon_ratio": self.max_epsilon_ratio,
                "max_identity_gap": self.max_identity_gap, "violations": self.violations}


def monte_carlo(coeffs: SdeCoefficients, domain: TimeDependentDomain, cone: ConeField, z0, n: int,
                paths: int, seed: int, functional="terminal", *, budget: GeometryBudget | None = None,
                batch: int = 2048, threads: int | None = None) -> MonteCarloResult:
    """Mean and standard error of a terminal statistic over independent seeded paths."""
    if paths < 2:
        raise DomainError("monte carlo needs at least two paths")
    if callable(functional):
        stat_fn, stat_name = functional, getattr(functional, "__name__", "custom")
    else:
        if functional not in STATISTICS:
            raise ConfigError(f"unknown statistic {functional!r}; choose from {sorted(STATISTICS)}")
        stat_fn, stat_name = STATISTICS[functional], functional
    z0 = _check_start(domain, z0)
    grid = TimeGrid.dyadic(domain.horizon, n)
    starts = list(range(0, paths, batch))

    def run(start):
        ids = np.arange(start, min(start + batch, paths))
        dW = normal_increments(seed, ids, grid.steps, coeffs.noise_dim, grid.mesh)
        return _simulate(coeffs, domain, cone, z0, grid, dW, budget, False, ids)

    workers = min(threads or _thread_cap(), len(starts))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(run, starts))
    else:
        batches = [run(s) for s in starts]
    values = np.concatenate([np.asarray(stat_fn(b.X_T, b.TV_T), float) for b in batches])
    violations = sum(1 for b in batches for i in range(b.X_T.shape[0]) if _path_violations(b, i, budget))
    eps_ratio = max(float(np.max(np.where(b.epsilon_bound > 0, b.epsilon / np.where(
        b.epsilon_bound > 0, b.epsilon_bound, 1.0), 0.0))) for b in batches)
    mean = float(values.mean())
    se = float(values.std(ddof=1) / math.sqrt(values.size))
    return MonteCarloResult(mean, se, int(values.size), n, seed, stat_name, eps_ratio,
                            max(float(b.identity_gap.max()) for b in batches), violations, values)
