"""Confidence intervals centred on the SCAD estimator: coverage, expected length, optimal half-widths."""

from .exceptions import (
    DomainError,
    InfeasibleError,
    QuadratureError,
    ScadCIError,
    SolverError,
    ValidationError,
)
from .metrics import ThetaGrid, coverage, max_sel, sel, sel_at_zero
from .optimizer import OptimizationProblem, OptimizationResult, optimize, verify_coverage
from .quadrature import QuadratureSettings
from .scad import (
    SplineHalfWidth,
    interval_endpoints,
    load_spline,
    save_spline,
    scad_estimate,
    scad_threshold,
    spline_fit,
)
from .stats_core import ProblemConfig, t_quantile

__version__ = "0.1.0"

__all__ = [
    "DomainError",
    "InfeasibleError",
    "OptimizationProblem",
    "OptimizationResult",
    "ProblemConfig",
    "QuadratureError",
    "QuadratureSettings",
    "ScadCIError",
    "SolverError",
    "SplineHalfWidth",
    "ThetaGrid",
    "ValidationError",
    "coverage",
    "interval_endpoints",
    "load_spline",
    "max_sel",
    "optimize",
    "save_spline",
    "scad_estimate",
    "scad_threshold",
    "sel",
    "sel_at_zero",
    "spline_fit",
    "t_quantile",
    "verify_coverage",
]
