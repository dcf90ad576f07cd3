"""High-level entry point: accept any (z, tau) with Im(tau) > 0.

Reduces the arguments, evaluates on the reduced domain with the requested
method, and lifts the six (or seven) values back, budgeting the extra guard
bits the lift prefactors consume.
"""

from __future__ import annotations

from .exceptions import DomainError
from .fsequence import DEFAULT_C1
from .fast import theta11_fast, theta_fast_forced, theta_uniform
from .kernel import Complex
from .naive import ThetaBundle, theta_all_naive
from .reduction import lift_guard_bits, lift_theta, reduce_args

METHODS = ("auto", "naive", "fast")


def compute(
    z: Complex,
    tau: Complex,
    P: int,
    method: str = "auto",
    with_th11: bool = False,
    p0: int | None = None,
    c1: int = DEFAULT_C1,
    stats: dict | None = None,
) -> ThetaBundle:
    """All theta values at (z, tau) within 2^-P, for any tau with Im > 0."""
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if not tau.im > 0:
        raise DomainError(f"Im(tau) = {tau.im} must be positive")
    cert = reduce_args(z, tau)
    guard = 0 if cert.is_trivial else lift_guard_bits(cert)
    # redo the reduction with enough working precision for the lift target
    pad = 2 * (P + guard) + 64
    if z.prec < pad or tau.prec < pad:
        cert = reduce_args(z.at_prec(pad), tau.at_prec(pad))
    inner_P = P + guard

    if method == "naive":
        bundle = theta_all_naive(cert.z_red, cert.tau_red, inner_P, with_th11=with_th11)
    else:
        runner = theta_uniform if method == "auto" else theta_fast_forced
        bundle = runner(cert.z_red, cert.tau_red, inner_P, p0=p0, c1=c1, stats=stats)
        if with_th11:
            bundle.th11_z = theta11_fast(bundle, cert.z_red, cert.tau_red)
    lifted = lift_theta(bundle, cert, P)
    lifted.achieved_bits = P
    if stats is not None:
        stats["certificate"] = cert
        stats["lift_guard_bits"] = guard
    return lifted
