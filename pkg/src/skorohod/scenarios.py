"""Scenario files: domain, cone, budget, driver and task in one JSON object.

A scenario looks like::

    {"schema": 1, "name": "static-interval", "horizon": 1.0,
     "domain": {"family": "moving_box", "lower": [0], "upper": [1]},
     "cone": {"kind": "normal"},
     "budget": {"measure": true, "rho0": 0.5, "eta0": 0.5},
     "driver": {"kind": "analytic", "components": [{"kind": "linear", "value": 0.5, "slope": -1}]},
     "task": "solve", "levels": [12, 12]}

Drivers are ``analytic`` (one time function per coordinate), ``csv`` (a path
written by :meth:`SampledCadlagPath.to_csv`) or ``brownian``
(``start + drift * t + scale * W_t`` from a seeded stream).  Any driver may add
``jumps``: ``[{"t": 0.3, "size": [...]}, ...]``.
"""
from __future__ import annotations

import copy
import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .geometry import (GeometryBudget, Resolution, TimeDependentDomain, domain_from_json,
                       dyadic_radii, modulus_table, parse_time_function)
from .paths import SampledCadlagPath, TimeGrid
from .reflection import ConeField, cone_from_json, measure_budget
from .rng import normal_increments
from .sde import SdeCoefficients

SCHEMA = 1
TASKS = ("solve", "refine", "sde", "measure", "check")


@dataclass
class Scenario:
    name: str
    horizon: float
    domain: TimeDependentDomain
    cone: ConeField
    budget_spec: dict
    driver_spec: dict | None
    task: str
    raw: dict
    base_dir: Path = Path(".")

    @property
    def levels(self) -> tuple[int, int]:
        lv = self.raw.get("levels", [10, 10])
        if isinstance(lv, int):
            return lv, lv
        return int(lv[0]), int(lv[-1])

    @property
    def seed(self) -> int:
        return int(self.raw.get("seed", 0))

    def budget(self) -> GeometryBudget:
        return build_budget(self.domain, self.cone, self.budget_spec)

    def driver(self, seed: int | None = None) -> SampledCadlagPath:
        if self.driver_spec is None:
            raise ConfigError(f"scenario {self.name!r} has no driver")
        return build_driver(self.driver_spec, self.horizon, self.domain.dim,
                            self.seed if seed is None else seed, self.base_dir)

    def sde(self) -> tuple[SdeCoefficients, np.ndarray]:
        spec = self.raw.get("sde")
        if spec is None:
            raise ConfigError(f"scenario {self.name!r} has no 'sde' section")
        z0 = np.asarray(spec.get("z0", [0.0] * self.domain.dim), float)
        return SdeCoefficients.from_json(spec, self.domain.dim), z0

    def to_json(self) -> dict:
        return copy.deepcopy(self.raw)


def _require(spec, key, where):
    if key not in spec:
        raise ConfigError(f"{where} is missing field {key!r}")
    return spec[key]


def parse_scenario(spec: dict, base_dir: Path | str = ".") -> Scenario:
    """Validate a decoded scenario object."""
    if not isinstance(spec, dict):
        raise ConfigError("a scenario must be a JSON object")
    if spec.get("schema") != SCHEMA:
        raise ConfigError(f"unsupported scenario schema {spec.get('schema')!r}; expected {SCHEMA}")
    horizon = float(_require(spec, "horizon", "scenario"))
    if not horizon > 0:
        raise ConfigError("horizon must be positive")
    task = spec.get("task", "solve")
    if task not in TASKS:
        raise ConfigError(f"unknown task {task!r}; choose from {TASKS}")
    domain = domain_from_json(_require(spec, "domain", "scenario"), horizon)
    cone = cone_from_json(spec.get("cone", {"kind": "normal"}))
    budget_spec = spec.get("budget", {})
    if not isinstance(budget_spec, dict):
        raise ConfigError("budget must be an object")
    driver_spec = spec.get("driver")
    if driver_spec is not None and driver_spec.get("kind") == "csv":
        path = Path(base_dir) / _require(driver_spec, "path", "csv driver")
        if not path.exists():
            raise ConfigError(f"driver file {path} does not exist")
    return Scenario(str(spec.get("name", "unnamed")), horizon, domain, cone, budget_spec,
                    driver_spec, task, copy.deepcopy(spec), Path(base_dir))


def load_scenario(source) -> Scenario:
    """Load a scenario from a file path or a catalogue name."""
    if isinstance(source, str) and source in CATALOGUE:
        return parse_scenario(CATALOGUE[source])
    path = Path(source)
    if not path.exists():
        raise ConfigError(f"scenario {source!r} is neither a file nor a catalogue name")
    text = path.read_text()
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise ConfigError(f"malformed JSON at byte {offset} (line {exc.lineno}, column {exc.colno}): "
                          f"{exc.msg}") from None
    return parse_scenario(spec, path.parent)


# -- budget -------------------------------------------------------------------------


_OVERRIDABLE = ("a", "e", "delta0", "h0")


def build_budget(domain: TimeDependentDomain, cone: ConeField, spec: dict) -> GeometryBudget:
    """Measure or assemble the geometry budget described by ``spec``."""
    res = Resolution.from_json(spec["resolution"]) if "resolution" in spec else Resolution()
    r0 = spec.get("r0")
    r0 = math.inf if r0 is None and domain.convex else r0
    if r0 is None:
        r0 = domain.exterior_radius
    if r0 is None:
        raise ConfigError("budget needs 'r0' for a nonconvex domain without a known radius")
    rho0 = float(_require(spec, "rho0", "budget"))
    eta0 = float(_require(spec, "eta0", "budget"))
    if spec.get("measure", True):
        m = measure_budget(domain, cone, r0=float(r0), rho0=rho0, eta0=eta0,
                           delta0=spec.get("delta0"), h0=spec.get("h0"), resolution=res,
                           anchor_times=int(spec.get("anchor_times", 5)),
                           anchor_spacing=spec.get("anchor_spacing"))
        budget = m.budget
        overrides = {k: float(spec[k]) for k in ("a", "e") if k in spec}
        return dataclasses.replace(budget, **overrides) if overrides else budget
    missing = [k for k in _OVERRIDABLE if k not in spec]
    if missing:
        raise ConfigError(f"budget without measurement needs {missing}")
    if "l_table" in spec:
        radii, values = spec["l_table"]["r"], spec["l_table"]["l"]
    else:
        radii, values = modulus_table(domain, dyadic_radii(domain.horizon), res)
        radii, values = [0.0] + list(radii), [0.0] + list(values)
    return GeometryBudget(r0=float(r0), rho0=rho0, eta0=eta0, a=float(spec["a"]), e=float(spec["e"]),
                          delta0=float(spec["delta0"]), h0=float(spec["h0"]),
                          l_radii=tuple(map(float, radii)), l_values=tuple(map(float, values)),
                          convex_slices=bool(domain.convex))


# -- drivers ------------------------------------------------------------------------


def _add_jumps(grid: TimeGrid, values: np.ndarray, jumps) -> np.ndarray:
    for jump in jumps or []:
        t = float(_require(jump, "t", "jump"))
        size = np.asarray(_require(jump, "size", "jump"), float)
        if size.shape != (values.shape[1],):
            raise ConfigError("jump size has the wrong dimension")
        k = grid.index_at(t)
        if grid.times[k] != t:
            k += 1
        values[k:] += size
    return values


def build_driver(spec: dict, horizon: float, dim: int, seed: int = 0,
                 base_dir: Path | str = ".") -> SampledCadlagPath:
    """Sample the driver described by ``spec`` on its dyadic level (default 16)."""
    kind = _require(spec, "kind", "driver")
    if kind == "csv":
        path = SampledCadlagPath.from_csv(Path(base_dir) / spec["path"])
        if path.dim != dim or abs(path.horizon - horizon) > 1e-12 * max(1.0, horizon):
            raise ConfigError("CSV driver does not match the scenario dimension or horizon")
        return path
    level = int(spec.get("level", 16))
    grid = TimeGrid.dyadic(horizon, level)
    t = grid.times
    if kind == "analytic":
        comps = [parse_time_function(c) for c in _require(spec, "components", "analytic driver")]
        if len(comps) != dim:
            raise ConfigError(f"analytic driver needs {dim} components")
        values = np.column_stack([np.broadcast_to(np.asarray(f(t), float), t.shape) for f in comps])
    elif kind == "brownian":
        start = np.asarray(spec.get("start", [0.0] * dim), float)
        drift = np.asarray(spec.get("drift", [0.0] * dim), float)
        scale = float(spec.get("scale", 1.0))
        if start.shape != (dim,) or drift.shape != (dim,):
            raise ConfigError("brownian start/drift have the wrong dimension")
        s = int(spec.get("seed", seed))
        dW = normal_increments(s, [int(spec.get("path", 0))], grid.steps, dim, grid.mesh)[0]
        W = np.vstack((np.zeros((1, dim)), np.cumsum(dW, axis=0)))
        values = start + np.outer(t, drift) + scale * W
    else:
        raise ConfigError(f"unknown driver kind {kind!r}")
    values = _add_jumps(grid, np.array(values, float), spec.get("jumps"))
    return SampledCadlagPath(grid, values)


# -- catalogue ----------------------------------------------------------------------


def _sin(offset, amplitude, frequency, phase=0.0):
    return {"kind": "sinusoid", "offset": offset, "amplitude": amplitude, "frequency": frequency,
            "phase": phase}


_TWO_PI = 2.0 * math.pi
_THETA = math.pi / 6.0

CATALOGUE = {
    "static-interval": {
        "schema": 1, "name": "static-interval", "horizon": 1.0,
        "domain": {"family": "moving_box", "lower": [0.0], "upper": [1.0]},
        "cone": {"kind": "normal"},
        "budget": {"measure": True, "rho0": 0.5, "eta0": 0.5},
        "driver": {"kind": "analytic", "components": [{"kind": "linear", "value": 0.5, "slope": -1.0}]},
        "task": "solve", "levels": [12, 12],
    },
    "moving-floor": {
        "schema": 1, "name": "moving-floor", "horizon": 1.0,
        "domain": {"family": "moving_box", "lower": [{"kind": "linear", "value": 0.0, "slope": 1.0}],
                   "upper": [3.0]},
        "cone": {"kind": "normal"},
        "budget": {"measure": True, "rho0": 0.5, "eta0": 0.5},
        "driver": {"kind": "analytic", "components": [0.5]},
        "task": "solve", "levels": [12, 12],
    },
    "breathing-ball": {
        "schema": 1, "name": "breathing-ball", "horizon": 1.0,
        "domain": {"family": "moving_ball", "center": [0.0, 0.0], "radius": _sin(1.0, 0.2, 1.0)},
        "cone": {"kind": "normal"},
        "budget": {"measure": True, "rho0": 0.25, "eta0": 0.25, "anchor_spacing": 0.25},
        "driver": {"kind": "brownian", "start": [0.75, 0.0], "drift": [0.5, 0.0], "scale": 0.1,
                   "level": 14},
        "task": "refine", "levels": [6, 12], "seed": 11,
    },
    "annulus-normal": {
        "schema": 1, "name": "annulus-normal", "horizon": 1.0,
        "domain": {"family": "annulus", "center": [0.0, 0.0], "inner": 0.5, "outer": 1.5},
        "cone": {"kind": "normal"},
        "budget": {"measure": True, "r0": 0.5, "rho0": 0.25, "eta0": 0.25, "anchor_spacing": 0.25},
        "driver": {"kind": "analytic", "level": 14,
                   "components": [_sin(1.0, -0.7, _TWO_PI), _sin(0.0, 0.2, 2 * _TWO_PI)]},
        "task": "check", "levels": [8, 12],
    },
    "half-plane-oblique": {
        "schema": 1, "name": "half-plane-oblique", "horizon": 1.0,
        "domain": {"family": "rounded_box", "lower": [-3.0, 0.0], "upper": [3.0, 2.0], "radius": 0.5},
        "cone": {"kind": "single", "theta": _THETA},
        "budget": {"measure": True, "rho0": 0.25, "eta0": 0.25, "anchor_spacing": 0.25},
        "driver": {"kind": "analytic", "level": 14,
                   "components": [_sin(0.0, 0.4, _TWO_PI), _sin(0.1, -0.8, _TWO_PI)]},
        "task": "check", "levels": [8, 12],
    },
    "half-plane-jumps": {
        "schema": 1, "name": "half-plane-jumps", "horizon": 1.0,
        "domain": {"family": "rounded_box", "lower": [-3.0, 0.0], "upper": [3.0, 2.0], "radius": 0.5},
        "cone": {"kind": "single", "theta": _THETA},
        "budget": {"measure": True, "rho0": 0.25, "eta0": 0.25, "anchor_spacing": 0.25},
        "driver": {"kind": "analytic", "level": 12,
                   "components": [0.0, {"kind": "linear", "value": -0.49, "slope": 0.0}],
                   "jumps": [{"t": 0.125 * k, "size": [0.01 * (-1) ** k, -0.025]} for k in range(1, 8)]},
        "task": "check", "levels": [8, 8],
    },
    "sde-symmetry": {
        "schema": 1, "name": "sde-symmetry", "horizon": 1.0,
        "domain": {"family": "moving_box", "lower": [0.0], "upper": [1.0]},
        "cone": {"kind": "normal"},
        "budget": {"measure": True, "rho0": 0.5, "eta0": 0.5},
        "sde": {"drift": 0.0, "sigma": 1.0, "z0": [0.5]},
        "task": "sde", "level": 10, "paths": 10000, "seed": 2024, "stat": "terminal",
    },
    "unit-disk-drift": {
        "schema": 1, "name": "unit-disk-drift", "horizon": 2.0,
        "domain": {"family": "moving_ball", "center": [0.0, 0.0], "radius": 1.0},
        "cone": {"kind": "normal"},
        "budget": {"measure": True, "rho0": 0.25, "eta0": 0.25, "anchor_spacing": 0.25},
        "sde": {"drift": [1.0, 0.0], "sigma": 0.0, "z0": [0.0, 0.0]},
        "task": "sde", "level": 12, "paths": 2, "seed": 0, "stat": "terminal_variation",
    },
    "shrinking-interval": {
        "schema": 1, "name": "shrinking-interval", "horizon": 2.0,
        "domain": {"family": "moving_box", "lower": [0.0],
                   "upper": [{"kind": "linear", "value": 1.0, "slope": -0.25}]},
        "cone": {"kind": "normal"},
        "budget": {"measure": True, "rho0": 0.25, "eta0": 0.25},
        "sde": {"drift": 0.0, "sigma": 0.0, "z0": [0.9]},
        "task": "sde", "level": 10, "paths": 2, "seed": 0, "stat": "terminal",
    },
    "unit-ball": {
        "schema": 1, "name": "unit-ball", "horizon": 1.0,
        "domain": {"family": "moving_ball", "center": [0.0, 0.0], "radius": 1.0},
        "cone": {"kind": "normal"},
        "budget": {"measure": True, "rho0": 0.25, "eta0": 0.25, "anchor_spacing": 0.25},
        "task": "measure",
    },
}


def scenario_catalogue() -> list[str]:
    """Names of the built-in scenarios."""
    return sorted(CATALOGUE)
