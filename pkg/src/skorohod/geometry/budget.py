"""Validated geometric constants consumed by the solvers and estimate checks."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import GeometryError


@dataclass(frozen=True)
class GeometryBudget:
    """Constants ``r0, rho0, eta0, a, e, delta0, h0`` and a sampled ``l`` table.

    ``l_radii``/``l_values`` tabulate the temporal modulus; :meth:`l` reads
    it conservatively (the value at the next tabulated gap).
    """

    r0: float
    rho0: float
    eta0: float
    a: float
    e: float
    delta0: float
    h0: float
    l_radii: tuple = (0.0,)
    l_values: tuple = (0.0,)
    convex_slices: bool = False
    notes: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        problems = self.violations()
        if problems:
            raise GeometryError("invalid geometry budget: " + "; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if not 0 < self.rho0 < self.r0:
            out.append(f"need 0 < rho0 < r0, got rho0={self.rho0}, r0={self.r0}")
        if not self.eta0 > 0:
            out.append("need eta0 > 0")
        if not self.a > 0:
            out.append(f"need a > 0, got {self.a}")
        if not 0 <= self.e < 1:
            out.append(f"need 0 <= e < 1, got {self.e}")
        if not 0 < self.delta0 < self.rho0:
            out.append(f"need 0 < delta0 < rho0, got delta0={self.delta0}")
        if not self.h0 > 1:
            out.append(f"need h0 > 1, got {self.h0}")
        radii = np.asarray(self.l_radii, float)
        values = np.asarray(self.l_values, float)
        if radii.shape != values.shape or radii.size == 0:
            out.append("l table radii/values mismatch")
        elif np.any(np.diff(radii) <= 0) or np.any(np.diff(values) < 0) or np.any(values < 0):
            out.append("l table must be increasing in r and nondecreasing in l")
        return out

    def l(self, r: float) -> float:
        """Tabulated modulus, read at the smallest tabulated gap ``>= r``."""
        if r <= 0:
            return 0.0
        radii = np.asarray(self.l_radii, float)
        values = np.asarray(self.l_values, float)
        k = int(np.searchsorted(radii, r * (1 - 1e-12), side="left"))
        if k >= radii.size:
            return float(values[-1])
        return float(values[k])

    def l_lower(self, r: float) -> float:
        """Tabulated modulus read at the largest tabulated gap ``<= r`` (a lower bracket)."""
        if r <= 0:
            return 0.0
        radii = np.asarray(self.l_radii, float)
        k = int(np.searchsorted(radii, r * (1 + 1e-12), side="right")) - 1
        return float(self.l_values[max(k, 0)])

    @property
    def jump_cap(self) -> float:
        """Largest admissible driver jump ``delta0/4 ^ rho0/(4 h0)``."""
        return min(self.delta0 / 4.0, self.rho0 / (4.0 * self.h0))

    @property
    def step_cap(self) -> float:
        """Per-step budget ``min(delta0/2, rho0/(2 h0))``."""
        return min(self.delta0 / 2.0, self.rho0 / (2.0 * self.h0))

    def to_json(self) -> dict:
        return {
            "r0": None if math.isinf(self.r0) else self.r0,
            "rho0": self.rho0, "eta0": self.eta0, "a": self.a, "e": self.e,
            "delta0": self.delta0, "h0": self.h0,
            "l_table": {"r": list(map(float, self.l_radii)), "l": list(map(float, self.l_values))},
            "convex_slices": self.convex_slices, "notes": self.notes,
        }

    @classmethod
    def from_json(cls, spec: dict) -> "GeometryBudget":
        table = spec.get("l_table", {"r": [0.0], "l": [0.0]})
        r0 = spec.get("r0")
        return cls(
            r0=math.inf if r0 is None else float(r0), rho0=float(spec["rho0"]),
            eta0=float(spec["eta0"]), a=float(spec["a"]), e=float(spec["e"]),
            delta0=float(spec["delta0"]), h0=float(spec["h0"]),
            l_radii=tuple(map(float, table["r"])), l_values=tuple(map(float, table["l"])),
            convex_slices=bool(spec.get("convex_slices", False)),
            notes=dict(spec.get("notes", {})),
        )


def dyadic_radii(horizon: float, depth: int = 20, per_octave: int = 4) -> tuple:
    """Gaps ``T * 2**(-j/per_octave)`` down to ``T / 2**depth``, increasing.

    Every dyadic gap ``T / 2**m`` is included exactly.
    """
    out = []
    for j in range(depth * per_octave, -1, -1):
        m, rem = divmod(j, per_octave)
        out.append(horizon / 2.0**m / 2.0 ** (rem / per_octave))
    return tuple(out)
