"""A posteriori error certificates for physics-informed surrogates of linear evolution PDEs."""

from .certify import (
    Certificate,
    ISSGain,
    ResidualSeries,
    SemigroupBound,
    certify_hard,
    certify_soft,
    estimate_curvature_bound,
    expected_equation_error,
    linear_gain,
    required_subintervals,
)
from .fields import NormKind, SampledField, SpatialGrid
from .problems import PROBLEMS, get_problem, residual_series
from .surrogate import NetworkSurrogate, analytic_perturbed, exact_surrogate

__all__ = [
    "Certificate",
    "ISSGain",
    "NetworkSurrogate",
    "NormKind",
    "PROBLEMS",
    "ResidualSeries",
    "SampledField",
    "SemigroupBound",
    "SpatialGrid",
    "analytic_perturbed",
    "certify_hard",
    "certify_soft",
    "estimate_curvature_bound",
    "exact_surrogate",
    "expected_equation_error",
    "get_problem",
    "linear_gain",
    "required_subintervals",
    "residual_series",
]
