"""Recovery of sparse signed initial data of the heat equation from sensor moments."""

from .discretization import (
    Mesh,
    RecoveryResult,
    auto_select_k,
    is_unisolvent,
    padua_points,
    recover,
    recover_initial,
    uniform_mesh,
)
from .heat_forward import heat_kernel, heat_moments_exact, heat_solution, sample_readings
from .lp_simplex import LPProblem, LPSolution, solve
from .measures import AtomicMeasure, MomentVector, exact_moments, multi_index_set, total_variation
from .metrics import cluster, kantorovich_norm, w1_distance
from .moment_dynamics import backward_propagator, build_A, growth_bound, invert_moments
from .quadrature import gh_sensors, hermite_rule, observe_moments, uniform_sensors

__version__ = "0.1.0"

__all__ = [
    "AtomicMeasure",
    "LPProblem",
    "LPSolution",
    "Mesh",
    "MomentVector",
    "RecoveryResult",
    "auto_select_k",
    "backward_propagator",
    "build_A",
    "cluster",
    "exact_moments",
    "gh_sensors",
    "growth_bound",
    "heat_kernel",
    "heat_moments_exact",
    "heat_solution",
    "hermite_rule",
    "invert_moments",
    "is_unisolvent",
    "kantorovich_norm",
    "multi_index_set",
    "observe_moments",
    "padua_points",
    "recover",
    "recover_initial",
    "sample_readings",
    "solve",
    "total_variation",
    "uniform_mesh",
    "uniform_sensors",
    "w1_distance",
]
