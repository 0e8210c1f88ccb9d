"""Catalogue of scalar functions of time used in domain and cone specs.

Every function is vectorised over ``t`` and exposes its derivative so that
Lipschitz bounds and analytic moduli can be computed.  JSON form::

    0.5                                                   # constant
    {"kind": "constant", "value": 0.5}
    {"kind": "linear", "value": 1.0, "slope": 0.2}        # value + slope * t
    {"kind": "sinusoid", "offset": 1.0, "amplitude": 0.2,
     "frequency": 1.0, "phase": 0.0}                      # offset + A sin(f t + p)
    {"kind": "table", "times": [...], "values": [...]}     # piecewise linear
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError


class TimeFunction:
    kind = "abstract"

    def __call__(self, t):
        raise NotImplementedError

    def derivative(self, t):
        raise NotImplementedError

    def lipschitz(self, horizon: float) -> float:
        """Upper bound on ``|f'|`` over ``[0, horizon]``."""
        raise NotImplementedError

    @property
    def is_constant(self) -> bool:
        return False

    def to_json(self):
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(TimeFunction):
    value: float
    kind = "constant"

    def __call__(self, t):
        return np.full(np.shape(t), float(self.value)) if np.ndim(t) else float(self.value)

    def derivative(self, t):
        return np.zeros(np.shape(t)) if np.ndim(t) else 0.0

    def lipschitz(self, horizon):
        return 0.0

    @property
    def is_constant(self):
        return True

    def to_json(self):
        return {"kind": "constant", "value": self.value}


@dataclass(frozen=True)
class Linear(TimeFunction):
    value: float
    slope: float
    kind = "linear"

    def __call__(self, t):
        return self.value + self.slope * np.asarray(t, dtype=float) if np.ndim(t) else self.value + self.slope * t

    def derivative(self, t):
        return np.full(np.shape(t), float(self.slope)) if np.ndim(t) else float(self.slope)

    def lipschitz(self, horizon):
        return abs(self.slope)

    @property
    def is_constant(self):
        return self.slope == 0.0

    def to_json(self):
        return {"kind": "linear", "value": self.value, "slope": self.slope}


@dataclass(frozen=True)
class Sinusoid(TimeFunction):
    offset: float
    amplitude: float
    frequency: float = 1.0
    phase: float = 0.0
    kind = "sinusoid"

    def __call__(self, t):
        return self.offset + self.amplitude * np.sin(self.frequency * np.asarray(t, dtype=float) + self.phase)

    def derivative(self, t):
        return self.amplitude * self.frequency * np.cos(self.frequency * np.asarray(t, dtype=float) + self.phase)

    def lipschitz(self, horizon):
        return abs(self.amplitude * self.frequency)

    @property
    def is_constant(self):
        return self.amplitude == 0.0 or self.frequency == 0.0

    def to_json(self):
        return {"kind": "sinusoid", "offset": self.offset, "amplitude": self.amplitude,
                "frequency": self.frequency, "phase": self.phase}


@dataclass(frozen=True)
class Table(TimeFunction):
    times: tuple
    values: tuple
    kind = "table"

    def __post_init__(self):
        if len(self.times) != len(self.values) or len(self.times) < 2:
            raise ConfigError("table needs matching times/values of length >= 2")
        if np.any(np.diff(self.times) <= 0):
            raise ConfigError("table times must be strictly increasing")

    def __call__(self, t):
        return np.interp(t, self.times, self.values)

    def derivative(self, t):
        slopes = np.diff(self.values) / np.diff(self.times)
        idx = np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(slopes) - 1)
        return slopes[idx]

    def lipschitz(self, horizon):
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.times))))

    @property
    def is_constant(self):
        return len(set(self.values)) == 1

    def to_json(self):
        return {"kind": "table", "times": list(self.times), "values": list(self.values)}


def parse_time_function(spec) -> TimeFunction:
    """Build a :class:`TimeFunction` from its JSON description."""
    if isinstance(spec, TimeFunction):
        return spec
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return Constant(float(spec))
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigError(f"cannot read time function from {spec!r}")
    kind = spec["kind"]
    try:
        if kind == "constant":
            return Constant(float(spec["value"]))
        if kind == "linear":
            return Linear(float(spec.get("value", 0.0)), float(spec["slope"]))
        if kind == "sinusoid":
            return Sinusoid(float(spec.get("offset", 0.0)), float(spec["amplitude"]),
                            float(spec.get("frequency", 1.0)), float(spec.get("phase", 0.0)))
        if kind == "table":
            return Table(tuple(float(v) for v in spec["times"]),
                         tuple(float(v) for v in spec["values"]))
    except KeyError as exc:
        raise ConfigError(f"time function {kind!r} is missing field {exc}") from None
    raise ConfigError(f"unknown time function kind {kind!r}")
