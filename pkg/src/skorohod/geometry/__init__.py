"""Time-dependent domains and their geometric functionals."""
from .budget import GeometryBudget, dyadic_radii
from .domains import (EPS_PSI, LevelSetDomain, Membership, MovingAnnulus, MovingBall, MovingBox,
                      MovingConvexPolytope, MovingRoundedBox, TimeDependentDomain,
                      domain_from_json, ellipse_domain)
from .functionals import (ExteriorSphereReport, boundary_modulus_lhat, exterior_sphere_check,
                          hausdorff, holder_exponent, inward_normal_cone, modulus_l,
                          modulus_table)
from .sampling import Resolution, sphere_lattice
from .timefunc import Constant, Linear, Sinusoid, Table, TimeFunction, parse_time_function

__all__ = [
    "EPS_PSI", "GeometryBudget", "dyadic_radii", "LevelSetDomain", "Membership", "MovingAnnulus",
    "MovingBall", "MovingBox", "MovingConvexPolytope", "MovingRoundedBox", "TimeDependentDomain",
    "domain_from_json", "ellipse_domain", "ExteriorSphereReport", "boundary_modulus_lhat",
    "exterior_sphere_check", "hausdorff", "holder_exponent", "inward_normal_cone", "modulus_l", "modulus_table",
    "Resolution", "sphere_lattice", "Constant", "Linear", "Sinusoid", "Table", "TimeFunction",
    "parse_time_function",
]
