"""Arbitrary-precision Jacobi theta functions.

Evaluates theta_00, theta_01, theta_10 (and theta_11) together with the
theta-constants at absolute precision P bits, through two interchangeable
engines: direct summation of the defining series (O(M(P) sqrt(P)) bit
operations) and a quasi-optimal O(M(P) log P) path built on the complex AGM,
a four-variable quadratic iteration and Newton inversion with doubling
working precision. Arbitrary arguments are reduced to the fundamental
domain first and the results lifted back.
"""

__version__ = "0.1.0"

from .api import compute
from .exceptions import (
    DomainError,
    NonConvergence,
    ParseError,
    PrecisionExhausted,
    PreconditionViolated,
    ThetaError,
)
from .fast import (
    frak_F,
    newton_quotients,
    tau_duplicate,
    theta11_fast,
    theta_fast_forced,
    theta_uniform,
    z_duplicate,
)
from .fsequence import FState, F_step, agm_optimal, f_infinity, good_sqrt_pair
from .kernel import Complex, ErrorBudget, exp_c, log_c, pi_const, propagate_error, sqrt_principal
from .naive import (
    PrecisionPlan,
    ThetaBundle,
    series_bound,
    theta11_naive,
    theta10_naive,
    theta_all_naive,
    theta_naive,
)
from .reduction import (
    ReductionCertificate,
    SIGMA_TABLE,
    lift_theta,
    reduce_args,
    reduce_tau,
    reduce_z,
)

__all__ = [
    "Complex",
    "ErrorBudget",
    "DomainError",
    "FState",
    "F_step",
    "NonConvergence",
    "ParseError",
    "PrecisionExhausted",
    "PreconditionViolated",
    "PrecisionPlan",
    "ReductionCertificate",
    "SIGMA_TABLE",
    "ThetaBundle",
    "ThetaError",
    "agm_optimal",
    "compute",
    "exp_c",
    "f_infinity",
    "frak_F",
    "good_sqrt_pair",
    "lift_theta",
    "log_c",
    "newton_quotients",
    "pi_const",
    "propagate_error",
    "reduce_args",
    "reduce_tau",
    "reduce_z",
    "series_bound",
    "sqrt_principal",
    "tau_duplicate",
    "theta11_fast",
    "theta11_naive",
    "theta10_naive",
    "theta_all_naive",
    "theta_fast_forced",
    "theta_naive",
    "theta_uniform",
    "z_duplicate",
    "__version__",
]
