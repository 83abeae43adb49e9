"""Estimate RKHS norms of sampled functions for Matern kernel interpolation."""
from .estimator import (
    EstimateReport,
    NoDecayError,
    NormTrace,
    algorithm1,
    algorithm2,
    build_trace,
    detect_membership,
)
from .fitting import FitError, fit_powerlaw, fit_saturating
from .geometry import (
    BoxDomain,
    GeometryError,
    NestedSchedule,
    PointSet,
    fill_distance,
    make_dyadic_schedule,
    make_quasi_uniform_schedule,
    separation_distance,
    uniformity,
)
from .interpolation import (
    Interpolant,
    error_bound,
    error_bound_loose,
    evaluate,
    increment_norm,
    interpolate,
    power_function,
    rkhs_norm,
)
from ._linalg import ConditioningError
from .kernel import KernelSpec, cross_vector, eval_kernel, kernel_matrix
from .oracle import dense_reference_norm, exp_kernel_norm

__version__ = "0.1.0"

__all__ = [
    "FitError",
    "fit_powerlaw",
    "fit_saturating",
    "BoxDomain",
    "ConditioningError",
    "EstimateReport",
    "GeometryError",
    "Interpolant",
    "KernelSpec",
    "NestedSchedule",
    "NoDecayError",
    "NormTrace",
    "PointSet",
    "algorithm1",
    "algorithm2",
    "build_trace",
    "cross_vector",
    "dense_reference_norm",
    "detect_membership",
    "error_bound",
    "error_bound_loose",
    "eval_kernel",
    "evaluate",
    "exp_kernel_norm",
    "fill_distance",
    "increment_norm",
    "interpolate",
    "kernel_matrix",
    "make_dyadic_schedule",
    "make_quasi_uniform_schedule",
    "power_function",
    "rkhs_norm",
    "separation_distance",
    "uniformity",
]
