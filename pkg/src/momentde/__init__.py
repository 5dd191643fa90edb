"""Linear moment differential equations as truncated power series.

The moment derivative ``d_m z^p = (m_p / m_{p-1}) z^{p-1}`` generalizes
``d/dz`` (``m_p = p!``). The package solves Cauchy problems
``d_m y = A(z) y + b(z)`` with guaranteed radii, converts between systems and
scalar equations, builds the ``Delta_h E`` basis for constant coefficients and
checks the fractional-calculus link for ``m_p = Gamma(1 + alpha p)``.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .constcoeff import delta_e, estimate_order_type, max_root_type_bound, solve_const
from .errors import (
    ConditionViolationError,
    MomentDEError,
    NoCyclicVectorError,
    OrderExhaustedError,
    OutOfRangeError,
    SingularAtOriginError,
    ValidationError,
)
from .fractional import PuiseuxSeries, caputo_derivative, check_identity_155, check_moment_caputo_identity, picard_oracle, rl_integral
from .sequences import MomentSequence, diagnose, eval_M
from .series import MatrixSeries, TruncatedSeries, VectorSeries, moment_derivative, multiply
from .solver import CauchyProblem, fit_geometric_bound, majorant_sequence, radius_certificate, solve
from .transforms import equation_to_system, find_cyclic_vector, system_to_equation

__all__ = [
    "CauchyProblem",
    "ConditionViolationError",
    "MatrixSeries",
    "MomentDEError",
    "MomentSequence",
    "NoCyclicVectorError",
    "OrderExhaustedError",
    "OutOfRangeError",
    "PuiseuxSeries",
    "SingularAtOriginError",
    "TruncatedSeries",
    "ValidationError",
    "VectorSeries",
    "caputo_derivative",
    "check_identity_155",
    "check_moment_caputo_identity",
    "delta_e",
    "diagnose",
    "equation_to_system",
    "estimate_order_type",
    "eval_M",
    "find_cyclic_vector",
    "fit_geometric_bound",
    "majorant_sequence",
    "max_root_type_bound",
    "moment_derivative",
    "multiply",
    "picard_oracle",
    "radius_certificate",
    "rl_integral",
    "solve",
    "solve_const",
    "system_to_equation",
]
