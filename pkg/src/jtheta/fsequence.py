"""Complex AGM and the four-variable F iteration with good sign choices.

One F step maps squared theta values at (z, tau) to squared values at
(z, 2 tau):

    F(x, y, z, t) = ((sx sz + sy st)/2, (sx st + sy sz)/2, (z + t)/2, sz st)

where sx = sqrt(x) etc. A *good* choice of square roots takes Re(sx) >= 0,
Re(sz) >= 0, and picks the signs of sy, st so that |sx - sy| <= |sx + sy|
(ties broken by Im(sy/sx) > 0), likewise for (sz, st). The products are
evaluated in the balanced form

    ((sx+sy)(sz+st) +- (sx-sy)(sz-st)) / 4

which keeps the rounding analysis of both output pairs symmetric.

The (z, t) lanes alone form the complex AGM. The homogenized limit

    F_inf(x, y, z, t) = (lim (x_n / z_inf)^(2^n) * z_inf, z_inf)

converges quadratically and is the invertible core of the fast theta
algorithm: the iteration stops at the first n with
|z_n - t_n| <= 2^-(P+n+c1), applies one further F step, and extracts the
limit by n+1 squarings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .exceptions import DomainError, NonConvergence, PrecisionExhausted
from .kernel import Complex, mag_ge, mag_le, sqrt_principal

# Stopping-rule guard bits; 55 suffices for theta-derived inputs and stays
# configurable for experiments.
DEFAULT_C1 = 55

ITER_SLACK = 64  # iteration cap is log2(P) + ITER_SLACK


@dataclass(frozen=True)
class FState:
    """One state of an F sequence."""

    x: Complex
    y: Complex
    z: Complex
    t: Complex
    n: int = 0


def good_sqrt_pair(u: Complex, v: Complex) -> tuple[Complex, Complex]:
    """Principal root of u, and the root of v making the pair a good choice.

    Returns (su, sv) with su = sqrt(u) (Re >= 0) and sv = +-sqrt(v) such that
    Re(sv/su) >= 0, ties broken by Im(sv/su) > 0.
    """
    if u.is_zero():
        raise DomainError("good_sqrt_pair needs u != 0")
    su = sqrt_principal(u)
    sv = sqrt_principal(v)
    cross = sv * su.conj()  # sign tests on sv/su without a division
    if cross.re < 0 or (cross.re == 0 and cross.im < 0):
        sv = -sv
    return su, sv


def F_step(s: FState) -> FState:
    """One good-choice F application in the balanced product form."""
    sx, sy = good_sqrt_pair(s.x, s.y)
    sz, st = good_sqrt_pair(s.z, s.t)
    p = (sx + sy) * (sz + st)
    m = (sx - sy) * (sz - st)
    u2 = (sz + st).square()
    v2 = (sz - st).square()
    return FState(
        x=(p + m).mul_2exp(-2),
        y=(p - m).mul_2exp(-2),
        z=(u2 + v2).mul_2exp(-2),
        t=(u2 - v2).mul_2exp(-2),
        n=s.n + 1,
    )


def _iteration_cap(P: int) -> int:
    return math.ceil(math.log2(max(P, 2))) + ITER_SLACK


def agm_optimal(a: Complex, b: Complex, P: int, stats: dict | None = None) -> Complex:
    """Limit of the optimal AGM sequence to absolute precision P.

    Expects a, b nonzero with b/a not a negative real; the iteration makes a
    good sign choice at every step and converges quadratically.
    """
    if a.is_zero() or b.is_zero():
        raise DomainError("AGM of zero")
    cap = _iteration_cap(P)
    n = 0
    while not mag_le(a - b, -(P + 4)):
        if n >= cap:
            raise NonConvergence(f"AGM not converged after {n} iterations")
        mean = (a + b).mul_2exp(-1)
        geo = sqrt_principal(a * b)
        cross = geo * mean.conj()
        if cross.re < 0 or (cross.re == 0 and cross.im < 0):
            geo = -geo
        if __debug__ and not mean.is_zero():
            assert (geo - mean).norm_() <= (geo + mean).norm_()
        a, b = mean, geo
        n += 1
    if stats is not None:
        stats["iterations"] = n
    return (a + b).mul_2exp(-1)


def f_infinity(
    x: Complex,
    y: Complex,
    z: Complex,
    t: Complex,
    P: int,
    c1: int = DEFAULT_C1,
    stats: dict | None = None,
) -> tuple[Complex, Complex]:
    """Homogenized F limit (lambda, mu) to absolute precision P.

    Inputs must carry enough working precision to support the c1 stopping
    guard. The magnitudes of all four lanes are watched against the floor
    2^-(work/4): quadruples that sink below it are outside the regime where
    good choices track genuine theta values.
    """
    work = min(x.prec, y.prec, z.prec, t.prec)
    if work < P + c1 + 16:
        raise PrecisionExhausted(f"work precision {work} cannot support P={P} with c1={c1}")
    eps_exp = -(work // 4)
    cap = _iteration_cap(P)
    state = FState(x, y, z, t, 0)
    n = 0
    while not mag_le(state.z - state.t, -(P + n + c1)):
        if n >= cap:
            raise NonConvergence(f"F sequence not converged after {n} iterations")
        state = F_step(state)
        n += 1
        for lane in (state.x, state.y, state.z, state.t):
            if not mag_ge(lane, eps_exp):
                raise PrecisionExhausted("F sequence left the bounded-magnitude regime")
    state = F_step(state)  # one final application before extracting the limit
    power = state.x / state.z
    for _ in range(n + 1):
        power = power.square()
    if stats is not None:
        stats["iterations"] = n + 1
        stats["squarings"] = n + 1
    return power * state.z, state.z


def validate_im_threshold(im_tau: float = 0.345) -> bool:
    """Check the series inequalities behind the good-choice theorems at im_tau.

    The validity threshold on Im(tau) is a tunable; this evaluates the three
    bounds (quotient real-part inequality, Re theta_00(0, tau) > 0 and
    Re theta_00(z, tau) > 0 envelopes) at |q| = e^(-pi im_tau) and returns
    True when all hold, so the default 0.345 can be verified numerically.
    """
    q = math.exp(-math.pi * im_tau)
    num = 2 * q**0.5 + 2 * q + 2 * q**9 / (1 - q**16) + 2 * q**7.5 / (1 - q**19)
    den = 2 - (2 * q**3 + 2 * q**4 + 2 * q**16 / (1 - q**20) + 2 * q**14 / (1 - q**19))
    quotient_ok = num <= den
    const_ok = 2 * q + 2 * q**4 / (1 - q**5) < 1
    value_ok = q**0.5 + q + q**3 + q**4 + q**3.5 + q**9 + 2 * q**14 / (1 - q**2) < 1
    return quotient_ok and const_ok and value_ok
