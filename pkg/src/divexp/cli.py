"""Command-line entry point: ``divexp <command> [options]``.

Results go to standard output as one JSON object (or a CSV table for
``sweep``); diagnostics go to standard error.  Exit status is 0 on success,
1 on invalid input and 2 when a numerical budget is exhausted.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from fractions import Fraction

import numpy as np

from .afe import afe_check, run_sweep, sharpness_config, sweep_configs
from .arithmetic import AlphaSplit
from .errors import NumericBudgetError, ValidationError
from .expsum import SmoothingSpec, SumSpec, mean_square, smoothed_sum, weighted_sum
from .farey import AFEParams, exceptional_measure, farey_approx
from .oscint import AmplitudeSpec, PhaseSpec, saddle_eval
from .voronoi import voronoi_rhs

THREADS_ENV = "DIVEXP_THREADS"

SWEEP_COLUMNS = [
    "M", "M1", "M2", "h", "k", "eta", "F", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "err",
    "norm_classic",
]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _rational(text: str):
    """A float, or an exact ``p/q`` fraction."""
    try:
        return Fraction(text) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from exc


def _threads(text: str) -> int:
    if text == "auto":
        return os.cpu_count() or 1
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return value


def _cplx(z: complex) -> dict:
    return {"re": z.real, "im": z.imag}


def _num(x: float) -> str:
    return f"{x:.17g}"


def _cmd_sum(args):
    alpha = args.alpha
    order = args.order or max(1, math.isqrt(args.m2))
    split = farey_approx(alpha, order)
    value = weighted_sum(args.m1, args.m2, split)
    return {"m1": args.m1, "m2": args.m2, "alpha": float(alpha), "h": split.h, "k": split.k,
            "eta": split.eta, "value": _cplx(value), "abs": abs(value)}


def _cmd_farey(args):
    s = farey_approx(args.alpha, args.order)
    return {"h": s.h, "k": s.k, "eta": s.eta, "eta_lo": s.eta_lo, "order": s.order,
            "h_bar": s.h_bar, "reduced": s.reduced}


def _params(args) -> AFEParams:
    return AFEParams(c=args.c, epsilon=args.epsilon, epsilon_prime=args.epsilon_prime)


def _report_json(r) -> dict:
    cond = r.conditions
    return {
        "M": r.M, "M1": r.M1, "M2": r.M2, "h": r.h, "k": r.k, "eta": r.eta, "F": r.F,
        "lhs": _cplx(r.lhs), "rhs": _cplx(r.rhs), "err": r.err,
        "norm_classic": r.norm_classic,
        "norm_improved": {f"{a:g}": v for a, v in r.norm_improved.items()},
        "flags": r.flags,
        "conditions": {
            "beta": cond.beta, "ell": cond.ell, "passed": cond.passed,
            "hypotheses_met": cond.hypotheses_met, "threshold": cond.threshold,
            "flags": cond.flags,
            "ladder": [{"j": row.j, "delta": row.delta, "order": row.order, "h": row.h,
                        "k": row.k, "eta": row.eta, "far_enough": row.far_enough,
                        "large_denominator": row.large_denominator} for row in cond.ladder],
        },
    }


def _cmd_afe(args):
    if args.sharpness:
        if args.m is None:
            raise ValidationError("--sharpness needs --m")
        c = sharpness_config(args.m)
        report = afe_check(c.M1, c.M2, c.h, c.k, c.eta, _params(args), M=c.M)
        out = _report_json(report)
        out["closed_form"] = _cplx(math.sqrt(c.M) * complex(
            math.cos(2 * math.pi * (-1 / math.sqrt(c.M))),
            math.sin(2 * math.pi * (-1 / math.sqrt(c.M)))))
        return out
    missing = [n for n in ("m1", "m2", "k", "eta") if getattr(args, n) is None]
    if missing:
        raise ValidationError(f"missing options: {', '.join('--' + m for m in missing)}")
    report = afe_check(args.m1, args.m2, args.h, args.k, args.eta, _params(args), M=args.m)
    return _report_json(report)


def _voronoi_setup(args):
    split = AlphaSplit.from_parts(args.h % args.k, args.k, args.eta)
    smoothing = SmoothingSpec.from_split(args.m, args.delta, split, d=args.d, J=args.J)
    return split, smoothing


def _cmd_voronoi(args):
    split, smoothing = _voronoi_setup(args)
    spec = SumSpec(1, 1, split, smoothing.weight())
    lhs = smoothed_sum(spec)
    exp = voronoi_rhs(spec, smoothing, args.n_trunc, keep_terms=bool(args.terms_csv),
                      threads=args.threads)
    if args.terms_csv:
        with open(args.terms_csv, "w", newline="") as fh:
            exp.write_terms_csv(fh)
    if exp.flagged:
        raise NumericBudgetError(f"quadrature did not converge for terms {exp.flagged[:10]}")
    total = exp.total()
    return {"M": args.m, "Delta": args.delta, "h": split.h, "k": split.k, "eta": split.eta,
            "U": smoothing.U, "J": smoothing.J, "N_trunc": exp.N_trunc,
            "smoothed_sum": _cplx(lhs), "main_integral": _cplx(exp.main_integral),
            "y_sum": _cplx(exp.y_sum), "k_sum": _cplx(exp.k_sum), "total": _cplx(total),
            "tail_estimate": exp.tail_estimate,
            "relative_error": abs(total - lhs) / abs(lhs) if lhs else None}


def _cmd_saddle(args):
    split, smoothing = _voronoi_setup(args)
    k, eta = split.k, split.eta
    B = -2 * math.sqrt(args.n) / k if eta > 0 else 2 * math.sqrt(args.n) / k
    phase = PhaseSpec(eta, B, args.m)
    amp = AmplitudeSpec(lambda x: np.asarray(x, dtype=float) ** -0.25 + 0j,
                        smoothing.M_minus1 ** -0.25)
    res = saddle_eval(amp, phase, smoothing, reference=args.reference)
    return {"n": args.n, "k": k, "eta": eta, "F": phase.F_scale, "x0": res.x0,
            "main_term": _cplx(res.main_term), "error_first": res.error_first,
            "error_edge": res.error_edge,
            "quadrature_reference": None if res.quadrature_reference is None
            else _cplx(res.quadrature_reference), "flags": res.flags}


def _cmd_measure(args):
    delta = args.delta if args.delta is not None else args.m ** 0.625
    est = exceptional_measure(args.m, delta, args.samples, args.seed, epsilon=args.epsilon,
                              epsilon_prime=args.epsilon_prime, c=args.c, threads=args.threads)
    return {"M": args.m, "Delta": delta, "samples": est.samples, "failures": est.failures,
            "estimate": est.estimate, "ci_low": est.ci_low, "ci_high": est.ci_high,
            "stderr": est.stderr, "order": est.order, "k_max": est.k_max,
            "eta_max": est.eta_max, "seed": args.seed}


def _cmd_sweep(args):
    configs = sweep_configs(args.m, args.count, args.seed, F_range=(args.f_min, args.f_max),
                            k_max=args.k_max)
    params = _params(args)
    reports = run_sweep(configs, params)
    if args.output == "json":
        return {"rows": [_report_json(r) for r in reports]}
    a_cols = [f"norm_improved_{a:g}" for a in params.a_candidates]
    buf = io.StringIO()
    out = csv.writer(buf, lineterminator="\n")
    out.writerow(SWEEP_COLUMNS + a_cols + ["conditions_passed", "hypotheses_met"])
    for r in reports:
        row = [r.M, r.M1, r.M2, r.h, r.k, _num(r.eta), _num(r.F), _num(r.lhs.real),
               _num(r.lhs.imag), _num(r.rhs.real), _num(r.rhs.imag), _num(r.err),
               _num(r.norm_classic)]
        row += [_num(r.norm_improved[a]) for a in params.a_candidates]
        row += [int(r.conditions.passed), int(r.conditions.hypotheses_met)]
        out.writerow(row)
    return buf.getvalue()


def _cmd_meansq(args):
    integral, squares = mean_square(args.m)
    M = args.m
    ratio = integral / (M * math.log(M) ** 3) if M > 1 else None
    return {"M": M, "integral": integral, "sum_d_squared": squares,
            "relative_difference": abs(integral - squares) / squares, "ratio_M_log3M": ratio}


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--threads", type=_threads,
                        default=_threads(os.environ.get(THREADS_ENV, "1")))
    common.add_argument("--output", choices=("json", "csv"), default=None)

    cond = _Parser(add_help=False)
    cond.add_argument("--c", type=float, default=1.0)
    cond.add_argument("--epsilon", type=float, default=0.05)
    cond.add_argument("--epsilon-prime", type=float, default=0.05)

    smooth = _Parser(add_help=False)
    smooth.add_argument("--m", type=float, required=True)
    smooth.add_argument("--delta", type=float, required=True)
    smooth.add_argument("--h", type=int, default=1)
    smooth.add_argument("--k", type=int, required=True)
    smooth.add_argument("--eta", type=float, required=True)
    smooth.add_argument("--J", type=int, default=4)
    smooth.add_argument("--d", type=float, default=0.01)

    p = _Parser(prog="divexp", description="Divisor exponential sums and their dual forms.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sum", parents=[common], help="D(M1, M2; alpha) by direct summation")
    s.add_argument("--m1", type=int, required=True)
    s.add_argument("--m2", type=int, required=True)
    s.add_argument("--alpha", type=_rational, required=True)
    s.add_argument("--order", type=int, default=None, help="Farey order used to split alpha")

    s = sub.add_parser("farey", parents=[common], help="Farey approximation of alpha")
    s.add_argument("--alpha", type=_rational, required=True)
    s.add_argument("--order", type=int, required=True)

    s = sub.add_parser("afe", parents=[common, cond], help="both sides of the functional equation")
    s.add_argument("--sharpness", action="store_true")
    s.add_argument("--m", type=int, default=None)
    s.add_argument("--m1", type=int)
    s.add_argument("--m2", type=int)
    s.add_argument("--h", type=int, default=1)
    s.add_argument("--k", type=int)
    s.add_argument("--eta", type=_rational)

    s = sub.add_parser("voronoi", parents=[common, smooth], help="Voronoi expansion check")
    s.add_argument("--n-trunc", type=int, default=None)
    s.add_argument("--terms-csv", default=None, help="write per-term integrals to this file")

    s = sub.add_parser("saddle", parents=[common, smooth], help="saddle point of one Y-term")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--reference", action="store_true")

    s = sub.add_parser("measure", parents=[common, cond], help="exceptional-set measure")
    s.add_argument("--m", type=int, required=True)
    s.add_argument("--delta", type=float, default=None)
    s.add_argument("--samples", type=int, default=100_000)

    s = sub.add_parser("sweep", parents=[common, cond], help="AFE sweep as CSV")
    s.add_argument("--m", type=int, default=10**6)
    s.add_argument("--count", type=int, default=200)
    s.add_argument("--f-min", type=float, default=10.0)
    s.add_argument("--f-max", type=float, default=1e4)
    s.add_argument("--k-max", type=int, default=10)

    s = sub.add_parser("meansq", parents=[common], help="mean-square identity")
    s.add_argument("--m", type=int, required=True)
    return p


_COMMANDS = {
    "sum": _cmd_sum, "farey": _cmd_farey, "afe": _cmd_afe, "voronoi": _cmd_voronoi,
    "saddle": _cmd_saddle, "measure": _cmd_measure, "sweep": _cmd_sweep, "meansq": _cmd_meansq,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.output is None:
        args.output = "csv" if args.command == "sweep" else "json"
    if args.output == "csv" and args.command != "sweep":
        print("divexp: --output csv is only available for sweep", file=sys.stderr)
        return 1
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            result = _COMMANDS[args.command](args)
        for w in caught:
            print(f"divexp: warning: {w.message}", file=sys.stderr)
    except ValidationError as exc:
        print(f"divexp: error: {exc}", file=sys.stderr)
        return 1
    except NumericBudgetError as exc:
        print(f"divexp: numeric budget exhausted: {exc}", file=sys.stderr)
        return 2
    if isinstance(result, str):
        sys.stdout.write(result)
    else:
        sys.stdout.write(json.dumps(result, sort_keys=True, allow_nan=False) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
