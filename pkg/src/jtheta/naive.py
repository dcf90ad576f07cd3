"""Theta evaluation by partial summation of the defining series.

theta(z, tau) = sum_n exp(i pi tau n^2 + 2 i pi n z) converges geometrically
fast on the reduced domain (Im tau >= 0.35, 0 <= Im z <= Im tau / 2). The
summation here uses the three-term recurrence

    v_{n+1} = q^{2n} v_1 v_n - q^{4n} v_{n-1},     v_n = q^{n^2} (w^{2n} + w^{-2n})

with q = e^{i pi tau}, w = e^{i pi z}, so that the large factor e^{-2 i pi n z}
is never formed on its own. One pass accumulates theta_00 and theta_01 at z
and at 0; the half-integer-index variants theta_10 and theta_11 use the
analogous recurrence u_{n+1} = q^{2n+1} v_1 u_n - q^{4n+2} u_{n-1} and are
summed directly (recovering them through Jacobi's identity would lose
O(Im tau) bits).

This module is the correctness oracle for the asymptotically fast path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpc, mpfr

from .exceptions import DomainError
from .kernel import Complex, context_for

LOG2E = math.log2(math.e)

# Partial sums of the 00/01 series are bounded by 4 on the reduced domain;
# the check runs at 64 bits and only under __debug__.
_CTX64 = gmpy2.context(precision=64)


def _check_domain(z: Complex | None, tau: Complex, min_im: float = 0.35):
    im_tau = tau.im
    if not im_tau >= min_im:
        raise DomainError(f"Im(tau) = {im_tau} < {min_im}")
    if z is not None:
        # relative slack so that decimal inputs on the strip boundary
        # (Im z = Im tau / 2) survive their binary rounding
        slack = _CTX64.mul(im_tau, _CTX64.exp2(-40))
        im_z = z.im
        if not (im_z >= -slack and 2 * im_z <= im_tau + slack):
            raise DomainError(f"Im(z) = {im_z} outside [0, Im(tau)/2]")


def series_bound(P: int, tau: Complex) -> int:
    """Number of terms B so that 4|q|^((B-1)^2) <= 2^-P.

    B = ceil(sqrt((P+2) / (pi Im(tau) log2 e))) + 1, requiring Im(tau) >= 0.35.
    """
    _check_domain(None, tau)
    im = float(tau.im)
    return math.ceil(math.sqrt((P + 2) / (math.pi * im * LOG2E))) + 1


@dataclass(frozen=True)
class PrecisionPlan:
    """Working-precision plan for one summation run."""

    P: int
    B: int
    work_bits: int

    def __post_init__(self):
        if self.B < 2:
            raise ValueError(f"series bound must be >= 2, got {self.B}")
        if self.work_bits <= self.P:
            raise ValueError("working precision must exceed target precision")

    @classmethod
    def for_series(cls, P: int, tau: Complex) -> "PrecisionPlan":
        B = series_bound(P, tau)
        return cls(P=P, B=B, work_bits=P + math.ceil(math.log2(B)) + 7)

    @classmethod
    def for_half_index(cls, P: int, z: Complex, tau: Complex) -> "PrecisionPlan":
        # One extra term, log B further guard bits (the recurrence factor is
        # bounded by 2 instead of 1), and headroom for |theta_10| which grows
        # like e^{pi(Im z - Im tau/4)} near the top of the z strip.
        B = series_bound(P, tau) + 1
        grow = math.pi * LOG2E * (float(z.im) - float(tau.im) / 4.0)
        extra = max(0, math.ceil(grow)) + 2
        return cls(P=P, B=B, work_bits=P + 2 * math.ceil(math.log2(B)) + 7 + extra)


@dataclass
class ThetaBundle:
    """theta_00/01/10 at (z, tau) and at (0, tau), plus theta_11 when computed.

    ``achieved_bits`` certifies each stored value lies within 2^-achieved_bits
    of the true one; ``guard_bits_used`` reports the working-precision margin
    the producing algorithm consumed (None when not tracked).
    """

    th00_z: Complex
    th01_z: Complex
    th00_0: Complex
    th01_0: Complex
    th10_z: Complex | None = None
    th10_0: Complex | None = None
    th11_z: Complex | None = None
    achieved_bits: int = 0
    guard_bits_used: int | None = None

    def jacobi_residual(self) -> mpfr:
        """|theta_00(0)^4 - theta_01(0)^4 - theta_10(0)^4|."""
        if self.th10_0 is None:
            raise ValueError("bundle has no theta_10 constant")
        r = self.th00_0.square().square() - self.th01_0.square().square() - self.th10_0.square().square()
        return r.abs_()

    def variety_residual(self) -> mpfr:
        """|theta_00^2(z)theta_00^2(0) - theta_01^2(z)theta_01^2(0) - theta_10^2(z)theta_10^2(0)|."""
        if self.th10_z is None or self.th10_0 is None:
            raise ValueError("bundle has no theta_10 values")
        r = (
            self.th00_z.square() * self.th00_0.square()
            - self.th01_z.square() * self.th01_0.square()
            - self.th10_z.square() * self.th10_0.square()
        )
        return r.abs_()

    def check_identities(self, tol_log2: int) -> bool:
        """True when both residuals are below 2**tol_log2."""
        bound = _CTX64.exp2(tol_log2)
        return self.jacobi_residual() <= bound and self.variety_residual() <= bound


def _as_mpc(x: Complex, work: int) -> mpc:
    return mpc(x.re, x.im, precision=(work, work))


def theta_naive(z: Complex, tau: Complex, P: int) -> ThetaBundle:
    """theta_00 and theta_01 at (z, tau) and (0, tau), absolute precision P."""
    _check_domain(z, tau)
    plan = PrecisionPlan.for_series(P, tau)
    work = plan.work_bits
    with gmpy2.context(precision=work):
        pi = gmpy2.const_pi()
        zc = _as_mpc(z, work)
        tc = _as_mpc(tau, work)
        i_pi = mpc(0, pi)
        q = gmpy2.exp(i_pi * tc)
        v1 = gmpy2.exp(2 * i_pi * (zc + tc / 2)) + gmpy2.exp(-2 * i_pi * (zc - tc / 2))
        q1 = q2 = q
        v, v_prev = v1, mpc(2)
        t0z = t1z = t00 = t10 = mpc(1)
        for n in range(1, plan.B + 1):
            # loop invariant: q1 = q^n, q2 = q^{n^2}, v = v_n, v_prev = v_{n-1}
            if n % 2:
                t0z += v
                t1z -= v
                t00 += 2 * q2
                t10 -= 2 * q2
            else:
                t0z += v
                t1z += v
                t00 += 2 * q2
                t10 += 2 * q2
            if __debug__:
                assert _CTX64.abs(t0z) <= 4 and _CTX64.abs(t1z) <= 4
            q1_sq = q1 * q1
            v, v_prev = (q1_sq * v1) * v - (q1_sq * q1_sq) * v_prev, v
            q2 *= q1_sq * q
            q1 *= q
    return ThetaBundle(
        th00_z=Complex._wrap(t0z, work),
        th01_z=Complex._wrap(t1z, work),
        th00_0=Complex._wrap(t00, work),
        th01_0=Complex._wrap(t10, work),
        achieved_bits=P,
        guard_bits_used=work - P,
    )


def _half_index_sums(z: Complex, tau: Complex, P: int, want_odd: bool):
    """Shared theta_10 / theta_11 summation engine.

    Returns (theta_10(z), theta_10(0), theta_11(z) or None) as raw mpc values
    together with the working precision.
    """
    _check_domain(z, tau)
    plan = PrecisionPlan.for_half_index(P, z, tau)
    work = plan.work_bits
    with gmpy2.context(precision=work):
        pi = gmpy2.const_pi()
        zc = _as_mpc(z, work)
        tc = _as_mpc(tau, work)
        i_pi = mpc(0, pi)
        q = gmpy2.exp(i_pi * tc)
        q_quarter = gmpy2.exp(i_pi * tc / 4)
        w = gmpy2.exp(i_pi * zc)
        w_inv = 1 / w
        v1 = q * (w * w + w_inv * w_inv)
        u = q_quarter * (w + w_inv)  # u_0; u_{-1} = u_0
        u_prev = u
        s10_z = u
        c10 = 2 * q_quarter  # constant series 2 q^{1/4} sum q^{n^2+n}
        if want_odd:
            m = q_quarter * (w - w_inv)  # odd core; m_{-1} = -m_0
            m_prev = -m
            s11 = m
        q1 = q2 = q
        for n in range(1, plan.B + 1):
            f = q1 * q1 / q  # q^{2n-1}
            fv = f * v1
            f_sq = f * f
            u, u_prev = fv * u - f_sq * u_prev, u
            s10_z += u
            c10 += 2 * q_quarter * (q2 * q1)
            if want_odd:
                m, m_prev = fv * m - f_sq * m_prev, m
                s11 = s11 - m if n % 2 else s11 + m
            q2 *= q1 * q1 * q
            q1 *= q
        th11 = mpc(0, 1) * s11 if want_odd else None
    return s10_z, c10, th11, work


def theta10_naive(z: Complex, tau: Complex, P: int) -> tuple[Complex, Complex]:
    """theta_10 at (z, tau) and (0, tau) by direct summation, precision P."""
    s10_z, c10, _, work = _half_index_sums(z, tau, P, want_odd=False)
    return Complex._wrap(s10_z, work), Complex._wrap(c10, work)


def theta11_naive(z: Complex, tau: Complex, P: int) -> Complex:
    """theta_11(z, tau) by direct summation of its odd series, precision P."""
    _, _, th11, work = _half_index_sums(z, tau, P, want_odd=True)
    return Complex._wrap(th11, work)


def theta_all_naive(z: Complex, tau: Complex, P: int, with_th11: bool = False) -> ThetaBundle:
    """Full six-value bundle (optionally with theta_11) via the naive path."""
    bundle = theta_naive(z, tau, P)
    s10_z, c10, th11, work = _half_index_sums(z, tau, P, want_odd=with_th11)
    bundle.th10_z = Complex._wrap(s10_z, work)
    bundle.th10_0 = Complex._wrap(c10, work)
    if with_th11:
        bundle.th11_z = Complex._wrap(th11, work)
    return bundle
