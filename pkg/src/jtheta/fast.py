"""Quasi-optimal theta evaluation: invert the quotient map with Newton,
then climb back to (z, tau) with duplication formulas.

The function inverted is

    frakF(s, t) = (z, tau)   for   s = theta_01^2(z,tau)/theta_00^2(z,tau),
                                   t = theta_01^2(0,tau)/theta_00^2(0,tau):

    b = sqrt(1 - t^2)   (positive real part; equals theta_10^2/theta_00^2 at 0)
    a = (1 - s t)/b     (equals theta_10^2/theta_00^2 at z)
    (x, y)  = F_inf(1, a, 1, b)
    (q1,q2) = F_inf(1, s, 1, t)
    frakF(s, t) = ( sqrt( log(q2 x/(q1 y)) * (q2/y)/(-2 pi) ), i q2/y )

with the z root taken with positive imaginary part. Newton's method solves
frakF(s, t) = (z, tau) with a working precision that doubles every
iteration, so the total cost is that of the last step; the Jacobian is
upper-triangular (the tau output depends only on t) and is approximated by
finite differences with step 2^(-p/2). Internally the residual uses the
*square* of the z output, which keeps the system smooth down to z = 0.

The uniform driver evaluates at (z2, tau2) = (z/2^(s+2), tau/2^(s+1)) inside
a fixed compact region, then doubles tau back s+1 times (AGM / duplication
steps) and z twice per level (z-duplication), recovering theta_10 squares
along the way; when P <= 25 Im(tau) bits the plain series is already
quasi-optimal and is used instead.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2

from .exceptions import DomainError, NonConvergence, PrecisionExhausted
from .kernel import Complex, context_for, log_c, mag_ge, pi_const, sqrt_principal
from .naive import LOG2E, ThetaBundle, theta_all_naive, theta_naive
from .fsequence import DEFAULT_C1, f_infinity, good_sqrt_pair
from .reduction import theta_probe

DEFAULT_P0 = 30_000  # production Newton seed; tests use a few hundred bits

NAIVE_THRESHOLD_RATIO = 25  # dispatch: naive series when P <= 25 Im(tau)

# Newton target padding: P' = P + G log2 P + H
NEWTON_GUARD_G = 8
NEWTON_GUARD_H = 64

_CTX64 = gmpy2.context(precision=64)


@dataclass(frozen=True)
class QuotientPair:
    """s = theta_01^2(z,tau)/theta_00^2(z,tau), t = the same at z = 0."""

    s: Complex
    t: Complex


@dataclass(frozen=True)
class SixSquares:
    """Squares of the six theta values at one (z, tau)."""

    th00_z: Complex
    th01_z: Complex
    th10_z: Complex
    th00_0: Complex
    th01_0: Complex
    th10_0: Complex


@dataclass(frozen=True)
class UniformParams:
    """Derived parameters of one uniform-algorithm run."""

    s_split: int
    z2: Complex
    tau2: Complex
    work_bits: int
    newton_P0: int
    naive_threshold_ratio: int = NAIVE_THRESHOLD_RATIO


def _fseq_work(P: int, c1: int) -> int:
    # room for the c1 stopping guard plus the O(log P) loss of F_inf
    return P + c1 + 6 * math.ceil(math.log2(max(P, 2))) + 48


def _frak_core(s: Complex, t: Complex, P: int, c1: int) -> tuple[Complex, Complex]:
    """(z^2, tau) outputs of frakF, skipping the final square root."""
    prec = min(s.prec, t.prec)
    one = Complex.one(prec)
    one_minus_t2 = 1 - t.square()
    if one_minus_t2.is_zero():
        raise DomainError("t^2 = 1: the quotient map is singular here")
    b = sqrt_principal(one_minus_t2)
    a = (1 - s * t) / b
    x, y = f_infinity(one, a, one, b, P, c1=c1)
    q1, q2 = f_infinity(one, s, one, t, P, c1=c1)
    mu = q2 / y
    tau_out = mu.times_i()
    z_sq = -(log_c((q2 * x) / (q1 * y)) * mu).mul_2exp(-1) / pi_const(prec)
    return z_sq, tau_out


def frak_F(s: Complex, t: Complex, P: int, c1: int = DEFAULT_C1) -> tuple[Complex, Complex]:
    """Recover (z, tau) from exact theta quotients (s, t).

    The z square root is chosen with positive imaginary part (positive real
    part on the Im = 0 tie).
    """
    z_sq, tau_out = _frak_core(s, t, P, c1)
    z_out = sqrt_principal(z_sq)
    if z_out.im < 0 or (z_out.im == 0 and z_out.re < 0):
        z_out = -z_out
    return z_out, tau_out


def newton_step(
    s: Complex,
    t: Complex,
    z_sq_target: Complex,
    tau_target: Complex,
    p: int,
    c1: int = DEFAULT_C1,
) -> tuple[Complex, Complex, Complex, Complex]:
    """One Newton update at working precision p.

    Returns (s', t', ds, dt). The Jacobian entries d(z^2)/ds, d(z^2)/dt and
    d(tau)/dt are finite differences with step h = 2^(-p/2); d(tau)/ds = 0.
    """
    wp = _fseq_work(p, c1)
    sp, tp = s.at_prec(wp), t.at_prec(wp)
    h = Complex.one(wp).mul_2exp(-(p // 2))
    target = p + 16
    f0_zsq, f0_tau = _frak_core(sp, tp, target, c1)
    one_d = z_sq_target.is_zero()
    if one_d:
        # constants only: s == t stays on the diagonal, solve for t alone
        ft_zsq, ft_tau = _frak_core(sp + h, tp + h, target, c1)
        dt = (f0_tau - tau_target.at_prec(wp)) / ((ft_tau - f0_tau) / h)
        ds = dt
    else:
        fs_zsq, _ = _frak_core(sp + h, tp, target, c1)
        ft_zsq, ft_tau = _frak_core(sp, tp + h, target, c1)
        a11 = (fs_zsq - f0_zsq) / h
        a12 = (ft_zsq - f0_zsq) / h
        a22 = (ft_tau - f0_tau) / h
        g_x = f0_zsq - z_sq_target.at_prec(wp)
        g_y = f0_tau - tau_target.at_prec(wp)
        dt = g_y / a22
        ds = (g_x - a12 * dt) / a11
    return (sp - ds).at_prec(p), (tp - dt).at_prec(p), ds, dt


def newton_quotients(
    z: Complex,
    tau: Complex,
    P: int,
    P0: int = DEFAULT_P0,
    c1: int = DEFAULT_C1,
    stats: dict | None = None,
) -> QuotientPair:
    """Theta quotients at (z, tau) accurate to P bits.

    Seeds from the naive series at P0 bits and doubles the working precision
    each Newton iteration until it clears P' = P + G log2 P + H.
    """
    target = P + NEWTON_GUARD_G * math.ceil(math.log2(max(P, 2))) + NEWTON_GUARD_H
    seed = theta_naive(z, tau, P0)
    s = seed.th01_z.square() / seed.th00_z.square()
    t = seed.th01_0.square() / seed.th00_0.square()
    z_sq = z.at_prec(target).square()
    tau_t = tau.at_prec(target)
    levels: list[int] = []
    lost_bits = 0.0
    p = P0
    no_contraction = 0
    prev_delta = None
    prev_k = None
    while p < target:
        p = 2 * p
        levels.append(p)
        s, t, ds, dt = newton_step(s, t, z_sq, tau_t, p, c1)
        delta = max(float(_CTX64.abs(ds._v)), float(_CTX64.abs(dt._v)))
        if prev_delta is not None and delta >= prev_delta and delta > 2.0 ** (-p):
            no_contraction += 1
            if no_contraction >= 3:
                raise NonConvergence("Newton correction failed to contract 3 times")
        else:
            no_contraction = 0
        # agreement bookkeeping: with k bits before the step and k' after,
        # 2k - k' estimates the bits lost to frakF evaluation noise
        k_now = -math.log2(delta) if delta > 0 else float(p)
        if prev_k is not None:
            lost_bits += max(0.0, 2 * prev_k - k_now)
        prev_k, prev_delta = k_now, delta
    if stats is not None:
        stats["levels"] = levels
        stats["lost_bits"] = lost_bits
        stats["P0"] = P0
        stats["target"] = target
    return QuotientPair(s=s, t=t)


def squares_from_quotients(pair: QuotientPair, P: int, c1: int = DEFAULT_C1) -> tuple[Complex, Complex, Complex, Complex]:
    """theta_00^2, theta_01^2 at z and 0 from the quotients (frakF inverse tail)."""
    wp = _fseq_work(P, c1)
    one = Complex.one(wp)
    s, t = pair.s.at_prec(wp), pair.t.at_prec(wp)
    a, b = f_infinity(one, s, one, t, P + 16, c1=c1)
    a, b = 1 / a, 1 / b
    return a, s * a, b, t * b


def tau_duplicate(
    th00_z_sq: Complex, th01_z_sq: Complex, th00_0_sq: Complex, th01_0_sq: Complex
) -> SixSquares:
    """Squares of all six values at (z, 2 tau) from 00/01 squares at (z, tau).

    Good square-root choices recover the theta values themselves inside the
    validity domain, so this is one F step extended with the theta_10
    combinations (z - t)/2 and (sx sz - sy st)/2.
    """
    sx, sy = good_sqrt_pair(th00_z_sq, th01_z_sq)
    sz, st = good_sqrt_pair(th00_0_sq, th01_0_sq)
    return SixSquares(
        th00_z=(sx * sz + sy * st).mul_2exp(-1),
        th01_z=(sx * st + sy * sz).mul_2exp(-1),
        th10_z=(sx * sz - sy * st).mul_2exp(-1),
        th00_0=(th00_0_sq + th01_0_sq).mul_2exp(-1),
        th01_0=sz * st,
        th10_0=(th00_0_sq - th01_0_sq).mul_2exp(-1),
    )


def _z_dup_from_squares(
    sq00: Complex,
    sq01: Complex,
    sq10: Complex,
    c00: Complex,
    c01: Complex,
    c10: Complex | None,
) -> tuple[Complex, Complex, Complex | None]:
    """z-duplication from squares at z/2 and constant values."""
    p00 = sq00.square()
    p01 = sq01.square()
    p10 = sq10.square()
    th00 = (p01 + p10) / (c00.square() * c00)
    th01 = (p00 - p10) / (c01.square() * c01)
    th10 = None
    if c10 is not None:
        th10 = (p00 - p01) / (c10.square() * c10)
    return th00, th01, th10


_CONST_FLOOR = 0.75  # |theta_00,01(0,tau)| >= 0.859 for Im tau > sqrt(3)/2


def z_duplicate(
    v00: Complex,
    v01: Complex,
    v10: Complex,
    c00: Complex,
    c01: Complex,
    c10: Complex | None = None,
) -> tuple[Complex, Complex, Complex | None]:
    """theta_00, theta_01 (and theta_10 when c10 is given) at (2z, tau).

    Inputs are the values at (z, tau) and the theta-constants; constants that
    fall below their proven magnitude floor indicate upstream corruption.
    """
    for name, c in (("theta_00(0)", c00), ("theta_01(0)", c01)):
        if float(_CTX64.abs(c._v)) < _CONST_FLOOR:
            raise DomainError(f"{name} = {c} below its magnitude floor")
    if c10 is not None and not mag_ge(c10, -(3 * c10.prec // 4)):
        raise DomainError("theta_10(0) vanishes at working precision")
    return _z_dup_from_squares(v00.square(), v01.square(), v10.square(), c00, c01, c10)


def _check_conditions(z: Complex, tau: Complex):
    tol = 2.0 ** -40
    im_t = float(tau.im)
    if not im_t > 0:
        raise DomainError(f"Im(tau) = {im_t} must be positive")
    if abs(float(tau.re)) > 0.5 + tol or float(_CTX64.norm(tau._v)) < 1 - tol:
        raise DomainError("tau outside the fundamental domain (reduce first)")
    if abs(float(z.re)) > 0.5 + tol:
        raise DomainError("Re(z) outside [-1/2, 1/2] (reduce first)")
    im_z = float(z.im)
    if im_z < -tol or im_z > im_t / 2 + tol:
        raise DomainError("Im(z) outside [0, Im(tau)/2] (reduce first)")


def _split_exponent(tau: Complex) -> int:
    """Largest s >= 0 with 1 <= |tau| / 2^s < 2."""
    mag2 = _CTX64.norm(tau._v)  # |tau|^2
    s = max(0, int(float(_CTX64.log2(mag2)) // 2))
    while _CTX64.norm(tau.mul_2exp(-s)._v) >= 4:
        s += 1
    while s > 0 and _CTX64.norm(tau.mul_2exp(-s)._v) < 1:
        s -= 1
    return s


def _envelope_ok(v: Complex, lo: float, hi: float) -> bool:
    m = float(_CTX64.abs(v._v))
    return lo - 1e-9 <= m <= hi + 1e-9


def theta_uniform(
    z: Complex,
    tau: Complex,
    P: int,
    p0: int | None = None,
    c1: int = DEFAULT_C1,
    stats: dict | None = None,
) -> ThetaBundle:
    """All six theta values at absolute precision P, uniform running time.

    (z, tau) must satisfy the reduced-domain conditions (tau in the closed
    fundamental domain, |Re z| <= 1/2, 0 <= Im z <= Im(tau)/2). Dispatches to
    the plain series when P <= 25 Im(tau); otherwise runs the Newton/AGM
    pipeline at internal precision 2P and reports the guard bits consumed.
    """
    _check_conditions(z, tau)
    if z.im == 0 and z.re < 0:
        z = -z  # thetas are even in z; keeps the frakF sign convention
    P0 = p0 if p0 is not None else DEFAULT_P0
    if P <= NAIVE_THRESHOLD_RATIO * float(tau.im):
        bundle = theta_all_naive(z, tau, P)
        if stats is not None:
            stats["method"] = "naive"
        return bundle
    return _fast_pipeline(z, tau, P, 2 * P, P0, c1, stats)


def theta_fast_forced(
    z: Complex,
    tau: Complex,
    P: int,
    p0: int | None = None,
    c1: int = DEFAULT_C1,
    stats: dict | None = None,
) -> ThetaBundle:
    """Run the Newton/AGM pipeline regardless of the naive-dispatch ratio.

    Outside the P > 25 Im(tau) regime the Im(tau)-proportional losses are no
    longer covered by work = 2P, so the working precision is widened
    accordingly.
    """
    _check_conditions(z, tau)
    if z.im == 0 and z.re < 0:
        z = -z
    P0 = p0 if p0 is not None else DEFAULT_P0
    extra = max(0, math.ceil(24 * float(tau.im)) + 8 * math.ceil(math.log2(max(P, 2))) + 128 - P)
    return _fast_pipeline(z, tau, P, 2 * P + extra, P0, c1, stats)


def _fast_pipeline(
    z: Complex, tau: Complex, P: int, work: int, P0: int, c1: int, stats: dict | None
) -> ThetaBundle:
    s_split = _split_exponent(tau)
    tau1 = tau.at_prec(work).mul_2exp(-s_split)
    z1 = z.at_prec(work).mul_2exp(-s_split)
    z2 = z1.mul_2exp(-2)
    tau2 = tau1.mul_2exp(-1)
    if stats is not None:
        stats["method"] = "fast"
        stats["params"] = UniformParams(
            s_split=s_split, z2=z2, tau2=tau2, work_bits=work, newton_P0=P0
        )

    nstats: dict = {}
    quotients = newton_quotients(z2, tau2, work, P0=P0, c1=c1, stats=nstats)
    sq00_z, sq01_z, sq00_0, sq01_0 = (
        v.at_prec(work) for v in squares_from_quotients(quotients, work, c1=c1)
    )
    guard = nstats.get("lost_bits", 0.0) + 2 * math.log2(work) + 24

    # tau2 -> tau1, including both theta_10 squares
    six = tau_duplicate(sq00_z, sq01_z, sq00_0, sq01_0)
    guard += 6
    c00 = sqrt_principal(six.th00_0)
    c01 = sqrt_principal(six.th01_0)
    c10 = sqrt_principal(six.th10_0)
    guard += 3
    # z2 -> z1/2 at tau1 (theta_10 fourth power comes straight from its square)
    u00, u01, _ = _z_dup_from_squares(six.th00_z, six.th01_z, six.th10_z, c00, c01, None)
    guard += 6

    for i in range(1, s_split + 1):
        if __debug__:
            # z-argument here sits in the Im z <= Im tau/4 strip of its tau
            assert _envelope_ok(u00, 0.6772, 1.3228) and _envelope_ok(u01, 0.6772, 1.3228)
            assert _envelope_ok(c00, 0.859, 1.141) and _envelope_ok(c01, 0.859, 1.141)
        c00_sq = c00.square()
        c01_sq = c01.square()
        cn00_sq = (c00_sq + c01_sq).mul_2exp(-1)  # theta_00^2(0, 2 tau')
        cn01_sq = c00 * c01  # theta_01^2(0, 2 tau')
        x00_sq = (u00 * c00 + u01 * c01).mul_2exp(-1)  # at (w, 2 tau')
        x01_sq = (u00 * c01 + u01 * c00).mul_2exp(-1)
        x10_sq = (u00 * c00 - u01 * c01).mul_2exp(-1)
        if __debug__:
            # the squares feed a z-duplication in the Im z <= Im tau/8 strip
            assert _envelope_ok(x00_sq, 0.8038**2, 1.1962**2)
            assert _envelope_ok(x01_sq, 0.8038**2, 1.1962**2)
            assert _envelope_ok(x10_sq, 0.0, 1.228**2)
        if i == s_split:
            c10 = sqrt_principal((c00_sq - c01_sq).mul_2exp(-1))
        c00 = sqrt_principal(cn00_sq)
        c01 = sqrt_principal(cn01_sq)
        u00, u01, _ = _z_dup_from_squares(x00_sq, x01_sq, x10_sq, c00, c01, None)
        guard += 13
    # here: u00, u01 = theta(z/2, tau); c00, c01, c10 = constants at tau

    loss10 = max(0.0, -float(_CTX64.log2(_CTX64.abs(c10._v))))
    guard += loss10 + 1  # the i = s (or step-8) square root of theta_10^2(0, tau)

    if __debug__:
        assert _envelope_ok(u00, 0.6772, 1.3228) and _envelope_ok(u01, 0.6772, 1.3228)
    # theta_10^2(z/2, tau) from the variety equation
    w10_sq = (u00.square() * c00.square() - u01.square() * c01.square()) / c10.square()
    guard += 2 * loss10 + 6
    # final z-duplication z/2 -> z, all three indices
    th00_z, th01_z, th10_z = _z_dup_from_squares(
        u00.square(), u01.square(), w10_sq, c00, c01, c10
    )
    guard += 3 * loss10 + 8

    guard_bits = math.ceil(guard)
    if stats is not None:
        stats["newton"] = nstats
        stats["guard_bits"] = guard_bits
    return ThetaBundle(
        th00_z=th00_z,
        th01_z=th01_z,
        th00_0=c00,
        th01_0=c01,
        th10_z=th10_z,
        th10_0=c10,
        achieved_bits=P,
        guard_bits_used=guard_bits,
    )


def theta11_fast(bundle: ThetaBundle, z: Complex, tau: Complex, probe=None) -> Complex:
    """theta_11(z, tau) from a six-value bundle via the quotient identity.

    theta_11^2 = (theta_01^2(z) theta_10^2(0) - theta_10^2(z) theta_01^2(0))
                 / theta_00^2(0); the square-root sign comes from a naive
    probe at 32 bits (retrying 64/128 on ambiguity). ``probe`` may override
    the prober for testing: a callable (z, tau, bits) -> Complex.
    """
    if z.is_zero():
        return Complex.zero(bundle.th00_z.prec)
    if bundle.th10_z is None or bundle.th10_0 is None:
        raise ValueError("bundle lacks theta_10 values")
    num = bundle.th01_z.square() * bundle.th10_0.square() - bundle.th10_z.square() * bundle.th01_0.square()
    w = sqrt_principal(num / bundle.th00_0.square())
    if w.is_zero():
        return w
    prober = probe if probe is not None else (lambda zz, tt, bits: theta_probe(zz, tt, bits)["11"])
    scale = float(_CTX64.abs(w._v))
    for bits in (32, 64, 128):
        approx = prober(z, tau, bits)
        d_plus = float(_CTX64.abs((w - approx)._v))
        d_minus = float(_CTX64.abs((w + approx)._v))
        if abs(d_plus - d_minus) > scale:  # clear separation
            return w if d_plus < d_minus else -w
    raise PrecisionExhausted("theta_11 sign probe stayed ambiguous")
