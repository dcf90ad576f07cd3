"""Kernel contract: principal branches, rounding, and error-budget clauses."""

import math
import random

import gmpy2
import pytest
from gmpy2 import mpfr

from jtheta import (
    Complex,
    DomainError,
    ErrorBudget,
    PrecisionExhausted,
    PreconditionViolated,
    exp_c,
    log_c,
    pi_const,
    propagate_error,
    sqrt_principal,
)
from helpers import CTX64, err_bits, log2abs, mk

import mpmath


def test_sqrt_exact_square():
    assert sqrt_principal(Complex.of(4, 0, 128)) == Complex.of(2, 0, 128)


def test_sqrt_principal_branch_on_axis():
    s = sqrt_principal(Complex.of(-1, 0, 128))
    assert s == Complex.of(0, 1, 128)
    # sign of a negative zero must not leak through to the lower axis
    s2 = sqrt_principal(Complex.of(mpfr(-1), mpfr("-0.0"), 128))
    assert s2.im > 0


def test_sqrt_of_2i():
    # (1+i)^2 = 2i, so the principal root of 2i is 1+i
    s = sqrt_principal(Complex.of(0, 2, 192))
    assert log2abs(s - Complex.of(1, 1, 192)) < -189
    assert log2abs(s.square() - Complex.of(0, 2, 192)) < -189


def test_sqrt_rounding_contract():
    rng = random.Random(42)
    for _ in range(50):
        a = mk(rng.uniform(-4, 4), rng.uniform(-4, 4), 96)
        if a.is_zero():
            continue
        s = sqrt_principal(a)
        assert s.re >= 0
        resid = (s.square() - a).abs_()
        assert resid <= CTX64.mul(mpfr(4), CTX64.mul(CTX64.exp2(-96), a.abs_()))


def test_exp_log_basics():
    assert exp_c(Complex.zero(100)) == Complex.of(1, 0, 100)
    assert log_c(Complex.of(1, 0, 100)).is_zero()
    with pytest.raises(DomainError):
        log_c(Complex.zero(100))


def test_exp_at_i_pi_times_one_plus_i():
    # exp(i pi (1+i)) = -e^-pi; reference from a 70-digit Gamma-free evaluation
    P = 192
    ref = mpfr("-0.04321391826377224977441773717172801127572810981063308298071968740105077", P)
    arg = Complex.of(0, pi_const(P), P) * Complex.of(1, 1, P)
    got = exp_c(arg)
    assert log2abs(got - Complex.of(ref, 0, P)) < -180
    assert abs(got.im) <= CTX64.exp2(-180)


def test_log_principal_branch():
    v = log_c(Complex.of(-1, 0, 128))
    assert v.re == 0 and log2abs(v - Complex.of(0, pi_const(128), 128)) < -125


def test_pi_const_cached_and_correct():
    assert pi_const(80) is pi_const(80)
    with mpmath.workprec(120):
        assert abs(mpmath.mpf(str(pi_const(80))) - mpmath.pi) < mpmath.ldexp(1, -78)


def test_complex_immutability_and_validation():
    a = Complex.of(1, 2, 64)
    with pytest.raises(AttributeError):
        a.prec = 128
    with pytest.raises(ValueError):
        Complex.of(1, 0, 1)
    with pytest.raises(PrecisionExhausted):
        Complex.of("1e999999999999999999", 0, 64)


def test_complex_arithmetic_precision_rules():
    a = Complex.of("1.25", "0.5", 64)
    b = Complex.of("0.3", "2", 200)
    assert (a + b).prec == 200
    assert (a * 3).prec == 64
    assert (2 - a) == Complex.of("0.75", "-0.5", 64)
    assert a.times_i() == Complex.of("-0.5", "1.25", 64)
    assert a.mul_2exp(-3) == Complex.of("0.15625", "0.0625", 64)
    assert (a / a - 1).is_zero()


# -- Theorem-style propagation clauses ---------------------------------------


def test_budget_add_clause():
    assert propagate_error("add", [(1.0, ErrorBudget(1)), (1.0, ErrorBudget(2))]).k == 3


def test_budget_square_clause():
    assert propagate_error("square", [(1.0, ErrorBudget(0))]).k == 2


def test_budget_exp_clause():
    assert propagate_error("exp", [(1.0, ErrorBudget(0.5))]).k == 6


def test_budget_mul_div_sqrt_formulas():
    k = propagate_error("mul", [(3.0, ErrorBudget(1)), (2.0, ErrorBudget(4))]).k
    assert k == 2 + 2 * 1 * 2.0 + 2 * 4 * 3.0
    k = propagate_error("sqrt", [(4.0, ErrorBudget(3))]).k
    assert k == 1.5
    k = propagate_error("div", [(2.0, ErrorBudget(1)), (1.0, ErrorBudget(1))]).k
    assert k == 6 * (2 + 2 * 1 + 2 * 2) + 2 * (4 + 8) * 5 + 2


def test_budget_preconditions():
    with pytest.raises(PreconditionViolated):
        propagate_error("add", [(1.0, ErrorBudget(2**40)), (1.0, ErrorBudget(0))], prec_bits=64)
    with pytest.raises(PreconditionViolated):
        propagate_error("sqrt", [(2.0**-70, ErrorBudget(4))], prec_bits=64)
    with pytest.raises(ValueError):
        propagate_error("pow", [(1.0, ErrorBudget(0))])


def test_budget_monotone_at_unit_magnitudes():
    # composing with a further operation never shrinks the budget when the
    # operands sit at unit magnitude
    for k1 in (0.0, 0.5, 3.0, 50.0):
        for k2 in (0.0, 1.0, 9.0):
            ops = [(1.0, ErrorBudget(k1)), (1.0, ErrorBudget(k2))]
            assert propagate_error("add", ops).k >= max(k1, k2)
            assert propagate_error("mul", ops).k >= max(k1, k2)
            assert propagate_error("div", ops).k >= max(k1, k2)
        assert propagate_error("square", [(1.0, ErrorBudget(k1))]).k >= k1
        assert propagate_error("exp", [(1.0, ErrorBudget(k1))]).k >= k1
        assert propagate_error("sqrt", [(1.0, ErrorBudget(k1))]).k >= k1


# -- empirical soundness ------------------------------------------------------

P_EMP = 96


def _perturbed(rng, v: Complex, k: float) -> Complex:
    # |z~ - z| <= (k-1) 2^-P before rounding, <= k 2^-P after
    ang = rng.uniform(0, 2 * math.pi)
    r = rng.uniform(0, (k - 1) * 2.0**-P_EMP)
    delta = mk(r * math.cos(ang), r * math.sin(ang), 2 * P_EMP)
    return (v.at_prec(2 * P_EMP) + delta).at_prec(P_EMP)


def _draw(rng, lo=0.3, hi=1.0):
    r = rng.uniform(lo, hi)
    ang = rng.uniform(0, 2 * math.pi)
    return mk(r * math.cos(ang), r * math.sin(ang), 4 * P_EMP)


def test_budgets_hold_empirically():
    """1000 seeded trials: observed error never exceeds the predicted budget."""
    rng = random.Random(20240901)
    kinds = ("add", "mul", "square", "exp", "div", "sqrt")
    tol = CTX64.exp2(-P_EMP)
    for trial in range(1000):
        kind = kinds[trial % len(kinds)]
        k1, k2 = rng.uniform(1.5, 8), rng.uniform(1.5, 8)
        z1 = _draw(rng, 0.5 if kind == "sqrt" else 0.3, 1.0)
        z2 = _draw(rng, 0.5, 1.0)
        z1p = _perturbed(rng, z1, k1).at_prec(4 * P_EMP)
        z2p = _perturbed(rng, z2, k2).at_prec(4 * P_EMP)
        ops = {
            "add": (lambda a, b: a + b, [(z1.abs_(), ErrorBudget(k1)), (z2.abs_(), ErrorBudget(k2))]),
            "mul": (lambda a, b: a * b, [(z1.abs_(), ErrorBudget(k1)), (z2.abs_(), ErrorBudget(k2))]),
            "square": (lambda a, b: a.square(), [(z1.abs_(), ErrorBudget(k1))]),
            "exp": (lambda a, b: exp_c(a), [(exp_c(z1).abs_(), ErrorBudget(k1))]),
            "div": (lambda a, b: a / b, [(z1.abs_(), ErrorBudget(k1)), (z2.abs_(), ErrorBudget(k2))]),
            "sqrt": (lambda a, b: sqrt_principal(a), [(z1.abs_(), ErrorBudget(k1))]),
        }
        fn, operands = ops[kind]
        budget = propagate_error(kind, operands, prec_bits=P_EMP).k
        exact = fn(z1, z2)
        approx = fn(z1p.at_prec(P_EMP), z2p.at_prec(P_EMP))
        diff = exact.at_prec(4 * P_EMP) - approx
        bound = CTX64.mul(mpfr(repr(budget), 64), tol)
        if kind in ("exp", "sqrt"):
            assert diff.abs_() <= bound, f"{kind} trial {trial}"
        else:
            assert abs(diff.re) <= bound and abs(diff.im) <= bound, f"{kind} trial {trial}"
