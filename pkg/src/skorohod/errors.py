"""Exception hierarchy shared by all modules."""


class SkorohodError(Exception):
    """Base class for every error raised by this package."""


class DomainError(SkorohodError, ValueError):
    """A time window or argument lies outside the admissible range."""


class GeometryError(SkorohodError):
    """A domain slice is empty, degenerate, or cannot be sampled."""


class DegenerateGeometryError(GeometryError):
    """The level-set gradient vanishes where a normal is required."""


class ProjectionError(SkorohodError):
    """The oblique projection did not converge."""


class GoodProjectionViolated(ProjectionError):
    """A projection exists but is longer than ``h0 * d(y, D_t)``."""


class BudgetError(ProjectionError):
    """The point to project is not within ``delta0`` of the slice."""


class SolverError(SkorohodError):
    """The discrete recursion failed at a given step."""

    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step
        self.detail = message


class StepRejected(SolverError):
    """An Euler increment is too large for the good-projection budget."""


class ConfigError(SkorohodError, ValueError):
    """A scenario file could not be parsed or validated."""
