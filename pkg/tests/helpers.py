"""Shared test utilities: exact conversions and independent oracles.

The reference values come from mpmath, applied strictly through the
*definitions*: theta_01/10/11 are expressed via jtheta(3, .) with shifted
arguments and explicit exponential prefactors, so the half-integer branch
convention follows tau continuously (mpmath's own jtheta(1/2, .) picks the
principal branch of the nome instead, which disagrees for |Re tau| > 1).
"""

from __future__ import annotations

import math

import gmpy2
import mpmath
from gmpy2 import mpfr

from jtheta import Complex

CTX64 = gmpy2.context(precision=64)


def to_mpf(x: mpfr) -> mpmath.mpf:
    m, e = x.as_mantissa_exp()
    return mpmath.ldexp(mpmath.mpf(int(m)), int(e))


def to_mpc(v: Complex) -> mpmath.mpc:
    return mpmath.mpc(to_mpf(v.re), to_mpf(v.im))


def log2abs(v) -> float:
    """log2 |v| as a float, -inf at 0; v may be Complex, mpfr or mpmath."""
    if isinstance(v, Complex):
        a = CTX64.abs(v._v)
    elif isinstance(v, mpfr):
        a = CTX64.abs(v)
    else:
        a = abs(v)
        return float(mpmath.log(a, 2)) if a != 0 else float("-inf")
    return float(CTX64.log2(a)) if a != 0 else float("-inf")


def err_bits(got: Complex, want) -> float:
    """log2 of |got - want| against an mpmath reference."""
    return log2abs(to_mpc(got) - want)


def oracle_thetas(z, tau, prec: int) -> dict:
    """All seven reference values at (z, tau), from the series definition."""
    with mpmath.workprec(prec):
        z = mpmath.mpc(z)
        tau = mpmath.mpc(tau)
        q = mpmath.exp(1j * mpmath.pi * tau)
        th = lambda u: mpmath.jtheta(3, mpmath.pi * u, q)
        half = mpmath.mpf(1) / 2
        pref = mpmath.exp(1j * mpmath.pi * tau / 4 + 1j * mpmath.pi * z)
        pref11 = mpmath.exp(1j * mpmath.pi * tau / 4 + 1j * mpmath.pi * (z + half))
        pref0 = mpmath.exp(1j * mpmath.pi * tau / 4)
        return {
            "th00_z": th(z),
            "th01_z": th(z + half),
            "th10_z": pref * th(z + tau / 2),
            "th00_0": th(0),
            "th01_0": th(half),
            "th10_0": pref0 * th(tau / 2),
            "th11_z": pref11 * th(z + (tau + 1) / 2),
        }


SIX = ("th00_z", "th01_z", "th10_z", "th00_0", "th01_0", "th10_0")


def bundle_err_bits(bundle, refs: dict, keys=SIX) -> float:
    """Worst log2 error of a bundle against an oracle dict."""
    return max(err_bits(getattr(bundle, k), refs[k]) for k in keys)


def mk(re, im, prec: int) -> Complex:
    """Complex from float/str parts, binding floats exactly."""
    conv = lambda u: repr(u) if isinstance(u, float) else u
    return Complex.of(conv(re), conv(im), prec)


def random_reduced_point(rng, prec: int, im_min=0.9, im_max=20.0):
    """(z, tau) in the reduced domain: tau in F, z in the half-strip."""
    re_t = rng.uniform(-0.5, 0.5)
    im_t = rng.uniform(im_min, im_max)
    im_t = max(im_t, math.sqrt(max(0.0, 1.0002 - re_t * re_t)))
    tau = mk(re_t, im_t, prec)
    z = mk(rng.uniform(-0.5, 0.5), rng.uniform(0.0, im_t / 2), prec)
    return z, tau


def real_agm(a, b, prec: int):
    """Plain real AGM iteration at `prec` bits (independent oracle)."""
    with mpmath.workprec(prec):
        a, b = mpmath.mpf(a), mpmath.mpf(b)
        for _ in range(prec):
            if abs(a - b) <= mpmath.ldexp(1, -prec + 4):
                break
            a, b = (a + b) / 2, mpmath.sqrt(a * b)
        return (a + b) / 2
