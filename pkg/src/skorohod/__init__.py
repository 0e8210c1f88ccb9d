"""Discrete Skorohod oblique-reflection solver for time-dependent domains."""
from .analysis import (check_apriori, epoch_decomposition, jump_bound_check, k_constants,
                       oracle_1d, ratio_stability)
from .errors import (BudgetError, ConfigError, DegenerateGeometryError, DomainError, GeometryError,
                     GoodProjectionViolated, ProjectionError, SkorohodError, SolverError,
                     StepRejected)
from .geometry import (GeometryBudget, LevelSetDomain, MovingAnnulus, MovingBall, MovingBox,
                       MovingConvexPolytope, MovingRoundedBox, Resolution, TimeDependentDomain,
                       domain_from_json, ellipse_domain)
from .paths import ReflectionRecord, SampledCadlagPath, TimeGrid
from .reflection import (FiniteGenerators, NormalCone, SingleDirection, audit_good_projection,
                         cone_continuity_modulus, cone_from_json, measure_budget, oblique_project)
from .scenarios import Scenario, load_scenario, scenario_catalogue
from .sde import SdeCoefficients, euler_reflected, monte_carlo
from .solver import (SkorohodProblem, SkorohodSolution, admissibility_check, refine_solve, solve,
                     validate_solution)

__version__ = "0.1.0"

__all__ = [
    "check_apriori", "epoch_decomposition", "jump_bound_check", "k_constants", "oracle_1d",
    "ratio_stability", "BudgetError", "ConfigError", "DegenerateGeometryError", "DomainError",
    "GeometryError", "GoodProjectionViolated", "ProjectionError", "SkorohodError",
    "SolverError", "StepRejected", "GeometryBudget", "LevelSetDomain", "MovingAnnulus",
    "MovingBall", "MovingBox", "MovingConvexPolytope", "MovingRoundedBox", "Resolution",
    "TimeDependentDomain", "domain_from_json", "ellipse_domain", "ReflectionRecord",
    "SampledCadlagPath", "TimeGrid", "FiniteGenerators", "NormalCone", "SingleDirection",
    "audit_good_projection", "cone_continuity_modulus", "cone_from_json", "measure_budget",
    "oblique_project", "Scenario", "load_scenario", "scenario_catalogue", "SdeCoefficients",
    "euler_reflected", "monte_carlo", "SkorohodProblem", "SkorohodSolution",
    "admissibility_check", "refine_solve", "solve", "validate_solution",
]
