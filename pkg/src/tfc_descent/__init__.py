"""Fuel-optimal powered descent by functional-connection collocation."""

from .config import RunConfig, load_config, parse_config
from .errors import (
    ArtifactError, ConfigurationError, DegenerateSegmentError, DescentError, DivergenceError,
    InfeasibleProfileError, InnerSolverError, OuterConvergenceError, ProfileClassificationError,
    PropagationError, RankDeficiencyError, SegmentCollapseError, SingularCostateError,
)
from .inner import InnerSettings, solve_inner
from .model import (
    BoundaryConditions, LanderConfig, ProfileKind, SegmentTimes, ThrustProfile, derive_params,
    make_profile, mass_at, reference_lander,
)
from .outer import GuidanceSolution, OuterSettings, ProfileMode, select_profile, solve, solve_switching_times
from .validation import PropagationReport, propagate_oracle, validate_solution

__version__ = "0.1.0"

__all__ = [
    "ArtifactError", "BoundaryConditions", "ConfigurationError", "DegenerateSegmentError",
    "DescentError", "DivergenceError", "GuidanceSolution", "InfeasibleProfileError",
    "InnerSettings", "InnerSolverError", "LanderConfig", "OuterConvergenceError", "OuterSettings",
    "ProfileClassificationError", "ProfileKind", "ProfileMode", "PropagationError",
    "PropagationReport", "RankDeficiencyError", "RunConfig", "SegmentCollapseError",
    "SegmentTimes", "SingularCostateError", "ThrustProfile", "derive_params", "load_config",
    "make_profile", "mass_at", "parse_config", "propagate_oracle", "select_profile", "solve",
    "solve_inner", "solve_switching_times", "reference_lander", "validate_solution",
]
