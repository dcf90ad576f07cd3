"""Command-line front end: one-shot evaluation, benchmark ladder, self-test.

Exit codes: 0 success, 2 domain/parse error, 3 precision or convergence
failure. All value output comes in three shapes: decimal strings with enough
digits to reproduce every bit at the stated precision, an exact
(mantissa, base-2 exponent) integer pair, and the requested format (json,
csv or plain text).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import random
import statistics
import sys
import time
from dataclasses import dataclass, field

import gmpy2
from gmpy2 import mpfr

from . import __version__
from .api import compute
from .exceptions import (
    DomainError,
    NonConvergence,
    ParseError,
    PrecisionExhausted,
    PreconditionViolated,
    ThetaError,
)
from .fsequence import DEFAULT_C1, agm_optimal, f_infinity
from .fast import theta_fast_forced, theta_uniform
from .kernel import Complex
from .naive import series_bound, theta_all_naive
from .reduction import lift_theta, reduce_args, theta_probe

BITS_PER_DIGIT = 3.3219

JSON_SCHEMA = "jtheta/1"

# the timing study's default evaluation point
BENCH_Z = ("0.123456789", "0.123456789")
BENCH_TAU = ("0.23456789", "1.23456789")

OUTPUT_KEYS = {
    "00": ("th00_z", "th00_0"),
    "01": ("th01_z", "th01_0"),
    "10": ("th10_z", "th10_0"),
    "11": ("th11_z",),
    "constants": ("th00_0", "th01_0", "th10_0"),
}


@dataclass
class EvalRequest:
    """One parsed compute request."""

    z: str
    tau: str
    prec_bits: int
    method: str = "auto"
    outputs: tuple[str, ...] = ("00", "01", "10", "constants")
    format: str = "json"
    p0: int | None = None
    c1: int = DEFAULT_C1

    def __post_init__(self):
        if self.prec_bits < 8:
            raise ParseError(f"precision must be at least 8 bits, got {self.prec_bits}")
        bad = set(self.outputs) - set(OUTPUT_KEYS)
        if bad:
            raise ParseError(f"unknown outputs {sorted(bad)}")


@dataclass
class BenchRecord:
    """One (precision, method) timing sample."""

    precision: int
    method: str
    wall_time: float
    iterations: int
    guard_bits_used: int
    residuals: dict = field(default_factory=dict)


def parse_complex(text: str, prec: int) -> Complex:
    """Parse 'a', 'bi', 'a+bi' (also 'j', hex floats 0x1.8p-2) into a Complex."""
    s = text.strip().replace(" ", "").replace("j", "i").replace("I", "i")
    if not s:
        raise ParseError("empty number")
    split = None
    for k in range(1, len(s)):
        if s[k] in "+-" and s[k - 1].lower() not in "e@p+-":
            split = k  # keep the last top-level sign
    if s.endswith("i"):
        re_part, im_part = (s[:split], s[split:-1]) if split else ("0", s[:-1])
    else:
        if split:
            raise ParseError(f"trailing real part in {text!r}")
        re_part, im_part = s, "0"
    if im_part in ("", "+", "-"):
        im_part += "1"
    try:
        re_v = mpfr(re_part, prec, 0)
        im_v = mpfr(im_part, prec, 0)
    except ValueError as exc:
        raise ParseError(f"cannot parse {text!r}: {exc}") from None
    if not (gmpy2.is_finite(re_v) and gmpy2.is_finite(im_v)):
        raise ParseError(f"non-finite value in {text!r}")
    return Complex.of(re_v, im_v, prec)


def _decimal(x: mpfr, P: int) -> str:
    digits = math.ceil(P * math.log10(2)) + 3
    mant, exp, _ = x.digits(10, digits)
    if mant.startswith("-"):
        return "-0." + mant[1:] + "e" + str(exp)
    return "0." + mant + "e" + str(exp)


def _value_dict(v: Complex, P: int) -> dict:
    mr, er = v.re.as_mantissa_exp()
    mi, ei = v.im.as_mantissa_exp()
    return {
        "re": _decimal(v.re, P),
        "im": _decimal(v.im, P),
        "re_exact": [int(mr), int(er)],
        "im_exact": [int(mi), int(ei)],
        "prec_bits": v.prec,
    }


def value_from_exact(pair: list, prec: int) -> mpfr:
    """Rebuild an mpfr from its (mantissa, exponent) JSON pair, bit-exactly."""
    m, e = pair
    ctx = gmpy2.context(precision=max(prec, max(2, int(m).bit_length())))
    return ctx.mul(mpfr(int(m), max(2, int(m).bit_length()) + 1), ctx.exp2(int(e)))


def cmd_compute(req: EvalRequest, stats: dict | None = None) -> dict:
    """Evaluate one request; returns the serializable result document."""
    parse_prec = 2 * req.prec_bits + 256
    z = parse_complex(req.z, parse_prec)
    tau = parse_complex(req.tau, parse_prec)
    run_stats: dict = {} if stats is None else stats
    bundle = compute(
        z,
        tau,
        req.prec_bits,
        method=req.method,
        with_th11="11" in req.outputs,
        p0=req.p0,
        c1=req.c1,
        stats=run_stats,
    )
    cert = run_stats.get("certificate")
    names: dict[str, Complex] = {}
    for key in req.outputs:
        for attr in OUTPUT_KEYS[key]:
            val = getattr(bundle, attr)
            if val is not None:
                names[attr] = val
    doc = {
        "schema": JSON_SCHEMA,
        "version": __version__,
        "request": {
            "z": req.z,
            "tau": req.tau,
            "prec_bits": req.prec_bits,
            "method": req.method,
            "outputs": list(req.outputs),
        },
        "achieved_bits": bundle.achieved_bits,
        "guard_bits_used": bundle.guard_bits_used,
        "reduction": None
        if cert is None
        else {
            "matrix": list(cert.matrix),
            "shift_a": cert.shift_a,
            "shift_b": cert.shift_b,
            "negated_z": cert.negated_z,
            "z_red": _decimal(cert.z_red.re, 64) + " + " + _decimal(cert.z_red.im, 64) + "i",
            "tau_red": _decimal(cert.tau_red.re, 64) + " + " + _decimal(cert.tau_red.im, 64) + "i",
        },
        "values": {k: _value_dict(v, req.prec_bits) for k, v in names.items()},
    }
    return doc


def _render_compute(doc: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(doc, indent=2)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["name", "re", "im", "prec_bits"])
        for name, val in doc["values"].items():
            writer.writerow([name, val["re"], val["im"], val["prec_bits"]])
        return buf.getvalue()
    lines = [f"# jtheta {doc['version']}  P={doc['request']['prec_bits']} bits"]
    for name, val in doc["values"].items():
        lines.append(f"{name} = {val['re']}  {val['im']} i")
    return "\n".join(lines) + "\n"


def run_bench(
    prec_bits_list: list[int],
    z_text: str,
    tau_text: str,
    repetitions: int = 3,
    p0: int | None = None,
) -> tuple[list[BenchRecord], dict]:
    """Time naive vs fast over a precision ladder at one point."""
    if sorted(prec_bits_list) != list(prec_bits_list):
        raise ParseError("precision list must be ascending")
    records: list[BenchRecord] = []
    for P in prec_bits_list:
        prec = 2 * P + 256
        z = parse_complex(z_text, prec)
        tau = parse_complex(tau_text, prec)
        cert = reduce_args(z, tau)
        for method in ("naive", "fast"):
            times = []
            bundle = None
            stats: dict = {}
            for _ in range(repetitions):
                t0 = time.perf_counter()
                if method == "naive":
                    bundle = theta_all_naive(cert.z_red, cert.tau_red, P)
                else:
                    stats = {}
                    bundle = theta_fast_forced(cert.z_red, cert.tau_red, P, p0=p0, stats=stats)
                times.append(time.perf_counter() - t0)
            iterations = (
                series_bound(P, cert.tau_red)
                if method == "naive"
                else len(stats.get("newton", {}).get("levels", []))
            )
            res = {
                "jacobi_log2": _log2_safe(bundle.jacobi_residual()),
                "variety_log2": _log2_safe(bundle.variety_residual()),
            }
            records.append(
                BenchRecord(
                    precision=P,
                    method=method,
                    wall_time=statistics.median(times),
                    iterations=iterations,
                    guard_bits_used=bundle.guard_bits_used or 0,
                    residuals=res,
                )
            )
    summary = _bench_summary(records)
    return records, summary


def _log2_safe(x) -> float:
    ctx = gmpy2.context(precision=64)
    x = abs(mpfr(x, 64))
    if x == 0:
        return float("-inf")
    return float(ctx.log2(x))


def _bench_summary(records: list[BenchRecord]) -> dict:
    by_p: dict[int, dict[str, float]] = {}
    for r in records:
        by_p.setdefault(r.precision, {})[r.method] = r.wall_time
    precs = sorted(by_p)
    ratios = [by_p[p]["naive"] / by_p[p]["fast"] for p in precs]
    crossover = next((p for p, r in zip(precs, ratios) if r > 1.0), None)
    slopes = {}
    if len(precs) >= 2:
        p1, p2 = precs[-2], precs[-1]
        span = math.log2(p2 / p1)
        slopes = {
            "naive": math.log2(by_p[p2]["naive"] / by_p[p1]["naive"]) / span,
            "fast": math.log2(by_p[p2]["fast"] / by_p[p1]["fast"]) / span,
        }
    return {
        "precisions_bits": precs,
        "naive_over_fast_ratio": ratios,
        "crossover_bits": crossover,
        "top_loglog_slopes": slopes,
    }


def _render_bench(records: list[BenchRecord], summary: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(
            {
                "schema": JSON_SCHEMA,
                "records": [r.__dict__ for r in records],
                "summary": summary,
            },
            indent=2,
        )
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["precision_bits", "method", "wall_time", "iterations", "guard_bits_used", "jacobi_log2", "variety_log2"])
    for r in records:
        writer.writerow(
            [r.precision, r.method, f"{r.wall_time:.6f}", r.iterations, r.guard_bits_used,
             f"{r.residuals['jacobi_log2']:.1f}", f"{r.residuals['variety_log2']:.1f}"]
        )
    buf.write(f"# ratios naive/fast: {['%.3f' % r for r in summary['naive_over_fast_ratio']]}\n")
    buf.write(f"# crossover_bits: {summary['crossover_bits']}\n")
    if summary["top_loglog_slopes"]:
        buf.write(
            f"# top slopes: naive {summary['top_loglog_slopes']['naive']:.3f} "
            f"fast {summary['top_loglog_slopes']['fast']:.3f}\n"
        )
    return buf.getvalue()


def _selftest_case(rng: random.Random, index: int, inject_fault: bool) -> list[str]:
    failures = []
    P = rng.choice((192, 256, 320))
    tau = Complex.of(repr(rng.uniform(-0.5, 0.5)), repr(rng.uniform(1.0, 5.0)), 2 * P + 64)
    im_z = rng.uniform(0, float(tau.im) / 2)
    z = Complex.of(repr(rng.uniform(-0.5, 0.5)), repr(im_z), 2 * P + 64)
    fast = theta_uniform(z, tau, P, p0=128)
    if inject_fault:
        bump = Complex.one(fast.th00_0.prec).mul_2exp(-(P - 10))
        fast.th00_0 = fast.th00_0 + bump
    ref = theta_all_naive(z, tau, P + 64)
    tol = gmpy2.context(precision=64).exp2(-P)
    for name in ("th00_z", "th01_z", "th10_z", "th00_0", "th01_0", "th10_0"):
        err = (getattr(fast, name) - getattr(ref, name)).abs_()
        if not err <= tol:
            failures.append(f"case {index}: {name} oracle mismatch ({_log2_safe(err):.0f} log2)")
    tol_id = gmpy2.context(precision=64).exp2(-(P - 8))
    if not fast.jacobi_residual() <= tol_id:
        failures.append(f"case {index}: Jacobi quartic residual too large")
    if not fast.variety_residual() <= tol_id:
        failures.append(f"case {index}: variety residual too large")
    # reduction round trip against the crude prober
    zu = Complex.of(repr(rng.uniform(-3, 3)), repr(rng.uniform(-1, 1)), 512)
    tu = Complex.of(repr(rng.uniform(-3, 3)), repr(rng.uniform(0.2, 3.0)), 512)
    cert = reduce_args(zu, tu)
    from .reduction import lift_guard_bits

    inner = theta_all_naive(cert.z_red, cert.tau_red, 160 + lift_guard_bits(cert))
    lifted = lift_theta(inner, cert, 160)
    probe = theta_probe(zu, tu, 96)
    tol_probe = gmpy2.context(precision=64).exp2(-80)
    for name, key in (("th00_z", "00"), ("th01_z", "01"), ("th10_z", "10")):
        err = (getattr(lifted, name) - probe[key]).abs_()
        if not err <= tol_probe:
            failures.append(f"case {index}: lift mismatch on {key}")
    return failures


def run_selftest(seed: int, cases: int, inject_fault: bool = False, parallel: bool = False) -> tuple[str, int]:
    """Deterministic invariant suite; returns (report, failure count)."""
    rng = random.Random(seed)
    case_seeds = [(i, rng.randrange(2**63)) for i in range(cases)]
    all_failures: list[str] = []

    def run_one(item):
        i, s = item
        return _selftest_case(random.Random(s), i, inject_fault and i == 0)

    if parallel:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=4) as pool:
            results = list(pool.map(run_one, case_seeds))
    else:
        results = [run_one(item) for item in case_seeds]
    for fails in results:
        all_failures.extend(fails)

    # convergence counters at a few precisions
    for P in (256, 4096):
        st: dict = {}
        x = Complex.of("0.9", "0.05", P + 128)
        agm_optimal(Complex.one(P + 128), x, P, stats=st)
        if st["iterations"] > math.log2(P) + 64:
            all_failures.append(f"AGM iteration count {st['iterations']} over budget at P={P}")
    lines = [f"jtheta selftest  seed={seed} cases={cases}"]
    for i, fails in enumerate(results):
        lines.append(f"case {i:3d}: " + ("ok" if not fails else "FAIL"))
    lines.extend(all_failures)
    lines.append(f"result: {'PASS' if not all_failures else 'FAIL'} ({len(all_failures)} failure(s))")
    return "\n".join(lines) + "\n", len(all_failures)


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="jtheta", description="Arbitrary-precision Jacobi theta functions")
    p.add_argument("--version", action="version", version=f"jtheta {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    pc = sub.add_parser("compute", help="evaluate theta at one point")
    pc.add_argument("--z", required=True, help="complex z, e.g. '0.1+0.2i'")
    pc.add_argument("--tau", required=True, help="complex tau with Im > 0")
    g = pc.add_mutually_exclusive_group()
    g.add_argument("--prec-bits", type=int, default=None)
    g.add_argument("--prec-digits", type=int, default=None)
    pc.add_argument("--method", choices=("auto", "naive", "fast"), default="auto")
    pc.add_argument("--outputs", default="00,01,10,constants", help="comma list from 00,01,10,11,constants")
    pc.add_argument("--format", choices=("json", "csv", "plain"), default="json")
    pc.add_argument("--out", default=None, help="write to FILE instead of stdout")
    pc.add_argument("--p0", type=int, default=None, help="Newton seed precision (bits)")
    pc.add_argument("--c1", type=int, default=DEFAULT_C1, help="F-limit stopping guard bits")

    pb = sub.add_parser("bench", help="naive-vs-fast timing ladder")
    pb.add_argument("--prec-list", required=True, help="ascending comma list of precisions")
    pb.add_argument("--digits", action="store_true", help="precision list is in decimal digits")
    pb.add_argument("--z", default="+".join(BENCH_Z) + "i")
    pb.add_argument("--tau", default="+".join(BENCH_TAU) + "i")
    pb.add_argument("--reps", type=int, default=3)
    pb.add_argument("--format", choices=("json", "csv"), default="csv")
    pb.add_argument("--out", default=None)
    pb.add_argument("--p0", type=int, default=None)

    ps = sub.add_parser("selftest", help="run the invariant suites")
    ps.add_argument("--seed", type=int, default=0)
    ps.add_argument("--cases", type=int, default=8)
    ps.add_argument("--inject-fault", action="store_true", help="corrupt one constant; the suite must notice")
    ps.add_argument("--parallel", action="store_true")
    ps.add_argument("--out", default=None)
    return p


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "compute":
            if args.prec_bits is None and args.prec_digits is None:
                bits = 128
            elif args.prec_bits is not None:
                bits = args.prec_bits
            else:
                bits = math.ceil(args.prec_digits * BITS_PER_DIGIT)
            req = EvalRequest(
                z=args.z,
                tau=args.tau,
                prec_bits=bits,
                method=args.method,
                outputs=tuple(s.strip() for s in args.outputs.split(",") if s.strip()),
                format=args.format,
                p0=args.p0,
                c1=args.c1,
            )
            doc = cmd_compute(req)
            _emit(_render_compute(doc, args.format), args.out)
            return 0
        if args.command == "bench":
            try:
                raw = [int(s) for s in args.prec_list.split(",")]
            except ValueError as exc:
                raise ParseError(f"bad precision list: {exc}") from None
            bits_list = [math.ceil(v * BITS_PER_DIGIT) if args.digits else v for v in raw]
            records, summary = run_bench(bits_list, args.z, args.tau, repetitions=args.reps, p0=args.p0)
            _emit(_render_bench(records, summary, args.format), args.out)
            return 0
        if args.command == "selftest":
            report, failures = run_selftest(args.seed, args.cases, args.inject_fault, args.parallel)
            _emit(report, args.out)
            return 0 if failures == 0 else 1
    except (DomainError, ParseError, PreconditionViolated) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (PrecisionExhausted, NonConvergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except ThetaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
