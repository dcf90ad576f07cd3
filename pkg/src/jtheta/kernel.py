"""Multiprecision complex arithmetic kernel.

Backed by GMP/MPFR/MPC through gmpy2. A :class:`Complex` is an immutable
complex value whose two parts are MPFR floats carrying an explicit binary
precision; every operation rounds each part to nearest-even at the result
precision. MPC's elementary functions (sqrt, exp, log) are correctly rounded,
so each is accurate to 0.5 ulp per part; the error budgets used across the
package treat them as contributing at most 1 unit of 2^-P absolute error for
the bounded magnitudes we manipulate.

All accounting is in *absolute* precision: ``ErrorBudget(k)`` at working
precision P asserts a part-wise (or modulus-wise, for exp/sqrt) error of at
most k*2^-P, and :func:`propagate_error` gives the budget after one primitive
operation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpc, mpfr

from .exceptions import DomainError, PrecisionExhausted, PreconditionViolated

MIN_PREC = 2

_CTX_CACHE: dict[int, "gmpy2.context"] = {}

# Small context for cheap magnitude comparisons (stopping rules, guards).
_CTX64 = gmpy2.context(precision=64)


def context_for(prec: int):
    """Cached rounding context (nearest-even) at ``prec`` bits per part."""
    ctx = _CTX_CACHE.get(prec)
    if ctx is None:
        if prec < MIN_PREC:
            raise ValueError(f"precision must be >= {MIN_PREC}, got {prec}")
        ctx = gmpy2.context(precision=prec)
        _CTX_CACHE[prec] = ctx
    return ctx


_PI_CACHE: dict[int, mpfr] = {}


def pi_const(prec: int) -> mpfr:
    """pi correctly rounded to ``prec`` bits (cached per precision)."""
    value = _PI_CACHE.get(prec)
    if value is None:
        value = context_for(prec).const_pi()
        _PI_CACHE[prec] = value
    return value


class Complex:
    """Immutable arbitrary-precision complex number with explicit precision.

    Binary operations round to the larger operand precision; Python ints mix
    in exactly. Non-finite results never escape: they raise
    :class:`PrecisionExhausted` at construction time.
    """

    __slots__ = ("_v", "prec")

    def __init__(self, value, prec: int | None = None):
        if isinstance(value, Complex):
            prec = prec or value.prec
            value = value._v
        elif prec is None:
            raise ValueError("prec required when not copying a Complex")
        context_for(prec)  # validates prec
        self._check_and_set(mpc(value, precision=(prec, prec)), prec)

    def _check_and_set(self, v: mpc, prec: int):
        if not gmpy2.is_finite(v):
            raise PrecisionExhausted(f"non-finite value at {prec} bits: {v}")
        object.__setattr__(self, "_v", v)
        object.__setattr__(self, "prec", prec)

    def __setattr__(self, *a):  # immutability
        raise AttributeError("Complex is immutable")

    @classmethod
    def _wrap(cls, v: mpc, prec: int) -> "Complex":
        self = object.__new__(cls)
        self._check_and_set(v, prec)
        return self

    @classmethod
    def of(cls, re, im, prec: int) -> "Complex":
        context_for(prec)  # validates prec
        return cls._wrap(mpc(mpfr(re, prec), mpfr(im, prec), precision=(prec, prec)), prec)

    @classmethod
    def zero(cls, prec: int) -> "Complex":
        return cls.of(0, 0, prec)

    @classmethod
    def one(cls, prec: int) -> "Complex":
        return cls.of(1, 0, prec)

    @property
    def re(self) -> mpfr:
        return self._v.real

    @property
    def im(self) -> mpfr:
        return self._v.imag

    def at_prec(self, prec: int) -> "Complex":
        if prec == self.prec:
            return self
        context_for(prec)
        return Complex._wrap(mpc(self._v, precision=(prec, prec)), prec)

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other):
        if isinstance(other, Complex):
            return other._v, max(self.prec, other.prec)
        if isinstance(other, (int, mpfr, mpc)):
            return other, self.prec
        return None, None

    def __add__(self, other):
        ov, prec = self._coerce(other)
        if ov is None:
            return NotImplemented
        return Complex._wrap(context_for(prec).add(self._v, ov), prec)

    __radd__ = __add__

    def __sub__(self, other):
        ov, prec = self._coerce(other)
        if ov is None:
            return NotImplemented
        return Complex._wrap(context_for(prec).sub(self._v, ov), prec)

    def __rsub__(self, other):
        ov, prec = self._coerce(other)
        if ov is None:
            return NotImplemented
        return Complex._wrap(context_for(prec).sub(ov, self._v), prec)

    def __mul__(self, other):
        ov, prec = self._coerce(other)
        if ov is None:
            return NotImplemented
        return Complex._wrap(context_for(prec).mul(self._v, ov), prec)

    __rmul__ = __mul__

    def __truediv__(self, other):
        ov, prec = self._coerce(other)
        if ov is None:
            return NotImplemented
        return Complex._wrap(context_for(prec).div(self._v, ov), prec)

    def __rtruediv__(self, other):
        ov, prec = self._coerce(other)
        if ov is None:
            return NotImplemented
        return Complex._wrap(context_for(prec).div(ov, self._v), prec)

    def __neg__(self):
        # gmpy2's unary minus rounds to the *active* context; keep ours exact
        return Complex._wrap(context_for(self.prec).minus(self._v), self.prec)

    def square(self) -> "Complex":
        return Complex._wrap(context_for(self.prec).square(self._v), self.prec)

    def conj(self) -> "Complex":
        v = self._v
        p = self.prec
        return Complex._wrap(mpc(v.real, context_for(p).minus(v.imag), precision=(p, p)), p)

    def times_i(self) -> "Complex":
        """Exact multiplication by i (no rounding)."""
        v = self._v
        p = self.prec
        return Complex._wrap(mpc(context_for(p).minus(v.imag), v.real, precision=(p, p)), p)

    def mul_2exp(self, k: int) -> "Complex":
        """Exact scaling by 2**k (k may be negative)."""
        ctx = context_for(self.prec)
        scale = ctx.exp2(k)
        return Complex._wrap(ctx.mul(self._v, scale), self.prec)

    def abs_(self) -> mpfr:
        return context_for(self.prec).abs(self._v)

    def norm_(self) -> mpfr:
        """|self|^2 as a real."""
        return context_for(self.prec).norm(self._v)

    def is_zero(self) -> bool:
        return self._v == 0

    def __eq__(self, other):
        if isinstance(other, Complex):
            return self._v == other._v
        if isinstance(other, (int, mpfr, mpc)):
            return self._v == other
        return NotImplemented

    __hash__ = None

    def __repr__(self):
        return f"Complex({self._v}, prec={self.prec})"

    def __str__(self):
        return str(self._v)


def mag_le(a: Complex, e2: int) -> bool:
    """Cheap test |a| <= 2**e2 (evaluated at 64 bits; only for stopping rules)."""
    return _CTX64.abs(a._v) <= _CTX64.exp2(e2)


def mag_ge(a: Complex, e2: int) -> bool:
    """Cheap test |a| >= 2**e2 (evaluated at 64 bits)."""
    return _CTX64.abs(a._v) >= _CTX64.exp2(e2)


def sqrt_principal(a: Complex) -> Complex:
    """Principal square root: Re >= 0, and Im >= 0 on the Re = 0 axis."""
    ctx = context_for(a.prec)
    s = ctx.sqrt(a._v)
    # MPC follows the branch cut with the sign of a zero imaginary part; the
    # contract here pins Re=0 results to the upper axis.
    if s.real == 0 and s.imag < 0:
        s = ctx.minus(s)
    return Complex._wrap(s, a.prec)


def exp_c(a: Complex) -> Complex:
    return Complex._wrap(context_for(a.prec).exp(a._v), a.prec)


def log_c(a: Complex) -> Complex:
    """Principal logarithm, Im in (-pi, pi]. Raises DomainError at 0."""
    if a.is_zero():
        raise DomainError("log of zero")
    return Complex._wrap(context_for(a.prec).log(a._v), a.prec)


# -- error propagation -----------------------------------------------------

OP_KINDS = ("add", "mul", "square", "exp", "div", "sqrt")

_ARITY = {"add": 2, "mul": 2, "square": 1, "exp": 1, "div": 2, "sqrt": 1}


@dataclass(frozen=True)
class ErrorBudget:
    """Absolute error in units of 2^-P: |z - z~| <= k * 2^-P per part."""

    k: float

    def __post_init__(self):
        if self.k < 0 or math.isnan(self.k):
            raise ValueError(f"budget must be a nonnegative real, got {self.k}")


def propagate_error(op_kind: str, operands, prec_bits: int | None = None) -> ErrorBudget:
    """Budget after one primitive operation on approximate operands.

    ``operands`` is a list of ``(magnitude_bound, ErrorBudget)`` pairs, one
    per input in operation order. For ``exp`` the magnitude bound is that of
    the *result* |e^z1|. When ``prec_bits`` is given the contract
    preconditions are checked: every k_j <= 2^(P/2), and for div/sqrt
    |z_j| >= 2 k_j 2^-P.
    """
    if op_kind not in _ARITY:
        raise ValueError(f"unknown op_kind {op_kind!r}")
    if len(operands) != _ARITY[op_kind]:
        raise ValueError(f"{op_kind} takes {_ARITY[op_kind]} operand(s), got {len(operands)}")
    mags = [float(m) for m, _ in operands]
    ks = [b.k for _, b in operands]

    if prec_bits is not None:
        cap = 2.0 ** (prec_bits / 2.0)
        for j, k in enumerate(ks):
            if k > cap:
                raise PreconditionViolated(f"budget k_{j+1}={k} exceeds 2^(P/2)")
        if op_kind in ("div", "sqrt"):
            ulp = 2.0 ** (-prec_bits)
            for j, (m, k) in enumerate(zip(mags, ks)):
                if m < 2.0 * k * ulp:
                    raise PreconditionViolated(f"|z_{j+1}|={m} below 2*k*2^-P")

    if op_kind == "add":
        k = ks[0] + ks[1]
    elif op_kind == "mul":
        k = 2.0 + 2.0 * ks[0] * mags[1] + 2.0 * ks[1] * mags[0]
    elif op_kind == "square":
        k = 2.0 + 4.0 * ks[0] * mags[0]
    elif op_kind == "exp":
        k = mags[0] * (7.0 * ks[0] + 8.5) / 2.0
    elif op_kind == "div":
        m1, m2 = mags
        k1, k2 = ks
        if m2 == 0:
            raise PreconditionViolated("division budget needs |z_2| > 0")
        k = (6.0 * (2.0 + 2.0 * k1 * m2 + 2.0 * k2 * m1)) / m2**2 + (
            2.0 * (4.0 + 8.0 * k2 * m2) * (2.0 * m1 * m2 + 1.0) + 2.0
        ) / m2**4
    else:  # sqrt
        if mags[0] == 0:
            raise PreconditionViolated("sqrt budget needs |z_1| > 0")
        k = ks[0] / math.sqrt(mags[0])
    return ErrorBudget(k)
