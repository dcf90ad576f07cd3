"""Argument reduction for (z, tau) and the lift back to the original point.

tau is moved into the closed fundamental domain of SL2(Z) (|Re| <= 1/2,
|tau| >= 1) by Gauss lattice reduction; z is then folded into the strip
|Re z| <= 1/2, 0 <= Im z <= Im(tau)/2 using quasi-periodicity and evenness.
The lift applies, in reverse order:

  * quasi-periodicity:  theta(z + a tau + b) = e^{-i pi a^2 tau - 2 i pi a z}
    theta(z) with index-dependent signs (-1)^a / (-1)^b / (-1)^(a+b) for the
    01 / 10 / 11 flavours,
  * evenness of theta_00/01/10 and oddness of theta_11,
  * the modular transformation: theta_i(z/(c tau+d), gamma tau) =
    zeta_i sqrt(c tau + d) e^{i pi c z^2/(c tau + d)} theta_sigma(i)(z, tau),
    where zeta_i is an eighth root of unity fixed by a low-precision probe
    and sigma permutes the indices (00, 01, 10) according to the parities of
    gamma; gamma is normalized to c > 0, or c = 0 and d > 0.

Because sigma mixes the indices, the lift always consumes and produces all
three even flavours jointly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import gmpy2
from gmpy2 import mpc, mpfr

from .exceptions import DomainError, NonConvergence, PrecisionExhausted
from .kernel import Complex, context_for, exp_c, sqrt_principal
from .naive import LOG2E, ThetaBundle

Matrix = tuple[int, int, int, int]

IDENTITY: Matrix = (1, 0, 0, 1)

# sigma(00), sigma(01), sigma(10) keyed by the parities of (a, b, c, d).
# These are the six parity classes compatible with ad - bc = 1.
SIGMA_TABLE: dict[tuple[int, int, int, int], tuple[str, str, str]] = {
    (1, 0, 0, 1): ("00", "01", "10"),
    (1, 1, 0, 1): ("01", "00", "10"),
    (1, 0, 1, 1): ("10", "01", "00"),
    (0, 1, 1, 0): ("00", "10", "01"),
    (1, 1, 1, 0): ("10", "00", "01"),
    (0, 1, 1, 1): ("01", "10", "00"),
}

_CTX64 = gmpy2.context(precision=64)

_PROBE_TERM_CAP = 200_000


def normalize_matrix(m: Matrix) -> Matrix:
    """Pick the representative of {m, -m} with c > 0, or c = 0 and d > 0."""
    a, b, c, d = m
    if a * d - b * c != 1:
        raise ValueError(f"not an SL2(Z) matrix: {m}")
    if c < 0 or (c == 0 and d < 0):
        return (-a, -b, -c, -d)
    return m


def sigma_for(m: Matrix) -> tuple[str, str, str]:
    """Index permutation (sigma(00), sigma(01), sigma(10)) for a matrix."""
    a, b, c, d = normalize_matrix(m)
    return SIGMA_TABLE[(a & 1, b & 1, c & 1, d & 1)]


def _round_int(x: mpfr, prec: int = 64) -> int:
    return int(context_for(max(prec, 64)).rint(x))


def reduce_tau(tau: Complex) -> tuple[Complex, Matrix]:
    """Move tau into the closed fundamental domain.

    Returns (tau_red, (a, b, c, d)) with tau_red = (a tau + b)/(c tau + d),
    |Re tau_red| <= 1/2 and |tau_red| >= 1 (both up to one ulp), ties broken
    toward the canonical representative (Re = -1/2; |tau| = 1 with Re < 0).
    """
    if not tau.im > 0:
        raise DomainError(f"Im(tau) = {tau.im} must be positive")
    work = tau.prec + 64
    ctx = context_for(work)
    t = mpc(tau.re, tau.im, precision=(work, work))
    a, b, c, d = IDENTITY
    one = mpfr(1)
    for _ in range(8 * work + 64):
        n = _round_int(t.real)
        if n:
            t = ctx.sub(t, n)
            a, b = a - n * c, b - n * d
        if ctx.norm(t) < one:
            t = ctx.div(-1, t)
            a, b, c, d = c, d, -a, -b
        else:
            break
    else:
        raise NonConvergence("fundamental-domain reduction did not terminate")
    # canonical boundary: Re = +1/2 -> -1/2, |tau| = 1 with Re > 0 -> apply S
    if t.real == mpfr("0.5"):
        t = ctx.sub(t, 1)
        a, b = a - c, b - d
    if ctx.norm(t) == one and t.real > 0:
        t = ctx.div(-1, t)
        a, b, c, d = c, d, -a, -b
    m = normalize_matrix((a, b, c, d))
    if m == IDENTITY:
        return tau, m
    a, b, c, d = m
    den = c * tau + d
    return ((a * tau + b) / den).at_prec(tau.prec), m


def reduce_z(z: Complex, tau: Complex) -> tuple[Complex, int, int, bool]:
    """Fold z into |Re| <= 1/2, 0 <= Im <= Im(tau)/2 (tau already reduced).

    Returns (z_red, shift_a, shift_b, negated) with the convention

        z_red = (-1)^negated * z - shift_a * tau - shift_b,

    i.e. the sign flip is applied before the lattice shifts.
    """
    prec = max(z.prec, tau.prec)
    a = _round_int(context_for(prec).div(z.im, tau.im), prec)
    w = z - a * tau
    negated = bool(w.im < 0)
    if negated:
        w, a = -w, -a
    b = _round_int(w.re, prec)
    if b:
        w = w - b
    return w.at_prec(prec), a, b, negated


@dataclass
class ReductionCertificate:
    """Everything needed to lift theta values at (z_red, tau_red) back to (z, tau)."""

    matrix: Matrix
    shift_a: int
    shift_b: int
    negated_z: bool
    z_red: Complex
    tau_red: Complex
    z_orig: Complex
    tau_orig: Complex

    @property
    def prefactor_spec(self) -> dict:
        """Data (c, d, z, tau) from which sqrt(c tau + d) and
        e^{i pi c z^2/(c tau + d)} are computed at lift time."""
        return {
            "c": self.matrix[2],
            "d": self.matrix[3],
            "z": self.z_orig,
            "tau": self.tau_orig,
        }

    @property
    def is_trivial(self) -> bool:
        return (
            self.matrix == IDENTITY
            and self.shift_a == 0
            and self.shift_b == 0
            and not self.negated_z
        )


def reduce_args(z: Complex, tau: Complex) -> ReductionCertificate:
    """Full (z, tau) -> (z_red, tau_red) reduction."""
    tau_red, m = reduce_tau(tau)
    a, b, c, d = m
    if m == IDENTITY:
        z_h = z
    else:
        z_h = z / (c * tau + d)
    z_red, sa, sb, neg = reduce_z(z_h, tau_red)
    return ReductionCertificate(
        matrix=m,
        shift_a=sa,
        shift_b=sb,
        negated_z=neg,
        z_red=z_red,
        tau_red=tau_red,
        z_orig=z,
        tau_orig=tau,
    )


def lift_guard_bits(cert: ReductionCertificate) -> int:
    """Extra working bits the lift consumes (prefactor magnitudes + margin)."""
    sa = cert.shift_a
    im_tr = float(cert.tau_red.im)
    im_zr = float(cert.z_red.im)
    bits = math.pi * LOG2E * (sa * sa * im_tr + 2 * sa * im_zr)
    total = max(0.0, bits)
    a, b, c, d = cert.matrix
    if (c, d) != (0, 1):
        ctx = _CTX64
        tau_o = mpc(cert.tau_orig.re, cert.tau_orig.im, precision=(64, 64))
        z_o = mpc(cert.z_orig.re, cert.z_orig.im, precision=(64, 64))
        den = ctx.add(ctx.mul(tau_o, c), d)
        # dividing by sqrt(c tau + d) amplifies when |c tau + d| < 1
        total += max(0.0, -0.5 * float(ctx.log2(ctx.abs(den))))
        exponent = ctx.div(ctx.mul(ctx.mul(mpc(0, ctx.const_pi()), c), ctx.square(z_o)), den)
        total += max(0.0, -float(exponent.real) * LOG2E)  # |1/f| growth
    # |theta| itself near the top of the z strip
    total += 4 + max(0.0, math.pi * LOG2E * (im_zr - im_tr / 4))
    return math.ceil(total) + 16


def theta_probe(z: Complex, tau: Complex, bits: int) -> dict[str, Complex]:
    """Crude two-sided summation of all four theta flavours at ~``bits``.

    Valid for any Im(tau) > 0 and any z; used to pin eighth roots of unity
    and square-root signs. Raises PrecisionExhausted when the series would
    need an unreasonable number of terms.
    """
    if not tau.im > 0:
        raise DomainError("Im(tau) must be positive")
    im_t = float(tau.im)
    im_z = abs(float(z.im))
    # after n*, terms shrink; run until the tail is below 2^-(bits+8)
    spread = (im_z + math.sqrt(im_z * im_z + im_t * (bits + 8) * math.log(2) / math.pi)) / im_t
    n_terms = int(spread) + 2
    if n_terms > _PROBE_TERM_CAP:
        raise PrecisionExhausted(f"probe needs {n_terms} terms; Im(tau) too small")
    peak = math.pi * LOG2E * im_z * im_z / im_t
    if peak > 1e6:
        raise PrecisionExhausted("probe magnitudes exceed the supported range")
    work = bits + math.ceil(peak) + math.ceil(math.log2(n_terms + 1)) + 24
    with gmpy2.context(precision=work):
        pi = gmpy2.const_pi()
        zc = mpc(z.re, z.im, precision=(work, work))
        tc = mpc(tau.re, tau.im, precision=(work, work))
        i_pi = mpc(0, pi)
        th = {"00": mpc(0), "01": mpc(0), "10": mpc(0), "11": mpc(0)}
        for n in range(-n_terms, n_terms + 1):
            e_int = gmpy2.exp(i_pi * (tc * (n * n) + 2 * n * zc))
            th["00"] += e_int
            th["01"] += -e_int if n % 2 else e_int
            h = n + 0.5
            e_half = gmpy2.exp(i_pi * (tc * (h * h) + 2 * h * zc))
            th["10"] += e_half
            th["11"] += (1j if n % 2 == 0 else -1j) * e_half
    return {k: Complex._wrap(v, work) for k, v in th.items()}


_EIGHTH_ROOTS_CACHE: dict[int, list[Complex]] = {}


def _eighth_roots(prec: int) -> list[Complex]:
    roots = _EIGHTH_ROOTS_CACHE.get(prec)
    if roots is None:
        quarter_pi = Complex.of(0, context_for(prec).const_pi(), prec).mul_2exp(-2)
        roots = [exp_c(quarter_pi * k) for k in range(8)]
        _EIGHTH_ROOTS_CACHE[prec] = roots
    return roots


def _pick_root(candidate_base: Complex, target: Complex, probe_bits: int) -> Complex:
    """zeta in U8 minimizing |candidate_base/zeta - target|, or None if ambiguous."""
    scale = float(candidate_base.abs_())
    if scale < 2.0 ** (-probe_bits // 2):
        return None
    best, best_d, second = None, None, None
    for zeta in _eighth_roots(max(candidate_base.prec, 64)):
        d = float((candidate_base / zeta - target).abs_())
        if best_d is None or d < best_d:
            best, best_d, second = zeta, d, best_d
        elif second is None or d < second:
            second = d
    # the probe separates roots by ~0.765*scale; demand a 2x margin on error
    if best_d > 0.19 * scale or (second is not None and second < 2 * best_d):
        return None
    return best


def lift_theta(values_at_reduced: ThetaBundle, cert: ReductionCertificate, prec) -> ThetaBundle:
    """Lift a bundle computed at (z_red, tau_red) to the original (z, tau).

    ``prec`` is the requested absolute precision (an int, or anything with a
    ``P`` attribute); the bundle must have been computed with the extra
    guard bits reported by :func:`lift_guard_bits`.
    """
    P = getattr(prec, "P", prec)
    if cert.is_trivial:
        return values_at_reduced
    src = values_at_reduced
    if src.th10_z is None or src.th10_0 is None:
        raise ValueError("the lift permutes indices and needs all three theta flavours")
    work = max(src.th00_z.prec, P + lift_guard_bits(cert))
    pi = context_for(work).const_pi()
    i_pi = Complex.of(0, pi, work)
    sa, sb = cert.shift_a, cert.shift_b
    tau_r = cert.tau_red.at_prec(work)
    z_r = cert.z_red.at_prec(work)

    vals = {
        "00": (src.th00_z.at_prec(work), src.th00_0.at_prec(work)),
        "01": (src.th01_z.at_prec(work), src.th01_0.at_prec(work)),
        "10": (src.th10_z.at_prec(work), src.th10_0.at_prec(work)),
    }
    th11 = src.th11_z.at_prec(work) if src.th11_z is not None else None

    # undo the z-lattice shift (Eq. quasi-periodicity at (z_red, tau_red))
    if sa or sb:
        factor = exp_c(i_pi * (-(sa * sa) * tau_r - 2 * sa * z_r))
        s01 = -1 if sa & 1 else 1
        s10 = -1 if sb & 1 else 1
        vals = {
            "00": (vals["00"][0] * factor, vals["00"][1]),
            "01": (vals["01"][0] * factor * s01, vals["01"][1]),
            "10": (vals["10"][0] * factor * s10, vals["10"][1]),
        }
        if th11 is not None:
            th11 = th11 * factor * (s01 * s10)
    # undo the parity flip (theta_11 is odd, the others even)
    if cert.negated_z and th11 is not None:
        th11 = -th11

    m = cert.matrix
    if m == IDENTITY:
        out = vals
    else:
        a, b, c, d = m
        tau_o = cert.tau_orig.at_prec(work)
        z_o = cert.z_orig.at_prec(work)
        den = c * tau_o + d
        root = sqrt_principal(den)
        f = exp_c(i_pi * c * z_o.square() / den)
        sigma = sigma_for(m)
        ok = False
        probe_exc: Exception | None = None
        for probe_bits in (32, 64, 128):
            try:
                probe = theta_probe(Complex.zero(64), cert.tau_orig, probe_bits)
            except PrecisionExhausted as exc:
                probe_exc = exc
                break
            out = {}
            ok = True
            for idx, target_idx in zip(("00", "01", "10"), sigma):
                v_z, v_0 = vals[idx]
                zeta = _pick_root(v_0 / root, probe[target_idx], probe_bits)
                if zeta is None:
                    ok = False
                    break
                out[target_idx] = (v_z / (zeta * root * f), v_0 / (zeta * root))
            if ok:
                break
        if not ok:
            raise PrecisionExhausted("could not disambiguate the eighth root of unity") from probe_exc
        if th11 is not None:
            for probe_bits in (32, 64, 128):
                probe11 = theta_probe(cert.z_orig, cert.tau_orig, probe_bits)["11"]
                zeta11 = _pick_root(th11 / (root * f), probe11, probe_bits)
                if zeta11 is not None:
                    th11 = th11 / (zeta11 * root * f)
                    break
            else:
                raise PrecisionExhausted("could not disambiguate the theta_11 eighth root")

    return ThetaBundle(
        th00_z=out["00"][0],
        th01_z=out["01"][0],
        th00_0=out["00"][1],
        th01_0=out["01"][1],
        th10_z=out["10"][0],
        th10_0=out["10"][1],
        th11_z=th11,
        achieved_bits=P,
        guard_bits_used=work - P,
    )
