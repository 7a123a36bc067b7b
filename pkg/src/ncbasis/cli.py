"""Command-line interface.

Exit codes: 0 success, 2 usage or domain error, 3 a certification or
verification check failed, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict
from fractions import Fraction

import numpy as np

from .algebra import Weight, check_alpha, parse_alpha
from .haar import HaarSystem, commutative_haar, distorted_measure, haar_analyze, haar_build, haar_synthesize
from .matcore import NormSpec, NumericFailure, format_p, matrix_from_json, parse_p, schatten_norm
from .normlab import DEFAULT_SEED, EstimationStrategy, certify, certify_schur
from .suites import SUITES, run_suite
from .tensor import haar_factor, product_partial_sum_certify, trivial_factor, unit_factor

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_NUMERIC = 0, 2, 3, 4
CERTIFY_CAP = 4
MEASURE_CAP = 10
# Only these arguments change report content; output destinations are left out.
CONFIG_KEYS = ("suite", "alpha", "level", "side", "p", "m", "left", "right", "method",
               "samples", "restarts", "iterations", "seed", "system")


class UsageError(Exception):
    pass


def alpha_arg(text: str):
    try:
        a = parse_alpha(text)
        check_alpha(a)
    except (ValueError, ZeroDivisionError) as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    return a


def p_arg(text: str) -> float:
    try:
        return parse_p(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def seed_arg(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from exc


def default_seed() -> int:
    env = os.environ.get("NCBASIS_SEED")
    if env:
        return seed_arg(env)
    return DEFAULT_SEED


def alpha_text(a) -> str | float:
    return f"{a.numerator}/{a.denominator}" if isinstance(a, Fraction) else a


def _write(text: str, path: str | None) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def _check_level(level: int, cap: int, unsafe: bool, what: str) -> None:
    if level < 1:
        raise UsageError("level must be >= 1")
    if level > cap and not unsafe:
        raise UsageError(f"{what} level {level} exceeds the default cap {cap}; pass --unsafe-scale to override")


def _load_system(path: str) -> HaarSystem:
    try:
        with open(path) as fh:
            return HaarSystem.from_json(json.load(fh))
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc}") from exc


def _factor(text: str, side: str, default_level: int = 1):
    """``alpha=1/3[,level=2][,side=left]``, ``units=4`` or ``trivial``."""
    if text.strip() == "trivial":
        return trivial_factor()
    fields = dict(part.split("=", 1) for part in text.split(",") if part)
    if "units" in fields:
        return unit_factor(int(fields["units"]))
    if "alpha" not in fields:
        raise UsageError(f"cannot parse factor {text!r}; expected alpha=..., units=... or trivial")
    alpha = alpha_arg(fields["alpha"])
    level = int(fields.get("level", default_level))
    return haar_factor(haar_build(alpha, level, side=fields.get("side", side)))


def cmd_gen_haar(args) -> int:
    sys_ = haar_build(args.alpha, args.level, side=args.side)
    resid = max(q.gram_residual() for q in sys_.quads)
    text = json.dumps(sys_.to_json(), indent=1) + "\n"
    _write(text, args.out)
    msg = f"elements: {len(sys_)}\ngram_residual: {resid:.3e}\n"
    (sys.stderr if args.out in (None, "-") else sys.stdout).write(msg)
    return EXIT_OK


def run_config(args) -> dict:
    cfg = {k: getattr(args, k, None) for k in CONFIG_KEYS}
    cfg["alpha"] = alpha_text(cfg["alpha"])
    cfg["p"] = format_p(cfg["p"])
    return cfg


def apply_config(args, path: str) -> None:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    cfg = obj.get("metadata", {}).get("config") or obj.get("config", obj)
    for key in CONFIG_KEYS:
        if key in cfg:
            setattr(args, key, cfg[key])
    args.alpha = alpha_arg(str(args.alpha))
    args.p = p_arg(str(args.p))


def cmd_certify(args) -> int:
    if args.config:
        apply_config(args, args.config)
    if args.seed is None:
        args.seed = default_seed()
    strategy = EstimationStrategy(method=args.method, samples=args.samples, restarts=args.restarts,
                                  iterations=args.iterations, seed=args.seed)
    schedule = None if not args.m else [int(v) for v in str(args.m).split(",")]
    spec = NormSpec(args.p, args.side)
    if args.suite == "haar":
        system = _load_system(args.system) if args.system else haar_build(args.alpha, args.level, side=args.side)
        _check_level(system.level, CERTIFY_CAP, args.unsafe_scale, "certification")
        if spec.side.value == "plain":
            raise UsageError("Haar certification needs --side left or right")
        report = certify(system, spec, strategy, schedule, level_cap=math.inf)
    elif args.suite == "schur":
        _check_level(args.level, CERTIFY_CAP, args.unsafe_scale, "certification")
        report = certify_schur(Weight(args.alpha, args.level), spec, strategy, schedule, level_cap=math.inf)
    else:
        if not (args.left and args.right):
            raise UsageError("the product suite needs --left and --right")
        report = product_partial_sum_certify(_factor(args.left, args.side), _factor(args.right, args.side),
                                             spec, strategy, schedule)
    if args.suite != "product" and not args.system:
        report.alpha = alpha_text(args.alpha)
    report.metadata["config"] = run_config(args)
    text = report.to_csv() if args.format == "csv" else report.to_json()
    _write(text, args.out)
    if args.figure:
        from .plotting import plot_norm_report
        plot_norm_report(report, args.figure)
    if report.failed_rows:
        for r in report.failed_rows:
            sys.stderr.write(f"m={r.m}: numeric failure: {r.error}\n")
        return EXIT_NUMERIC
    if not report.passed:
        bad = [r.m for r in report.rows if r.passed is False]
        sys.stderr.write(f"rows exceeding the bound: {bad}\n")
        return EXIT_FAIL
    return EXIT_OK


def cmd_verify(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    kwargs = {}
    if args.t:
        kwargs["t"] = tuple(args.t)
    if args.samples:
        kwargs["samples"] = args.samples
    if args.suite == "measure":
        _check_level(args.level, MEASURE_CAP, args.unsafe_scale, "measure")
    elif args.suite != "shell":
        _check_level(args.level, CERTIFY_CAP, args.unsafe_scale, "verification")
    checks = run_suite(args.suite, args.alpha, args.level, seed, **kwargs)
    obj = {
        "suite": args.suite,
        "alpha": alpha_text(args.alpha),
        "level": args.level,
        "seed": seed,
        "passed": all(c.passed for c in checks),
        "checks": [c.to_json() for c in checks],
    }
    _write(json.dumps(obj, indent=2) + "\n", args.out)
    if args.figure and args.suite == "commutative":
        from .plotting import plot_commutative
        plot_commutative(commutative_haar(args.alpha, args.level), args.figure)
    return EXIT_OK if obj["passed"] else EXIT_FAIL


def cmd_measure(args) -> int:
    _check_level(args.level, MEASURE_CAP, args.unsafe_scale, "measure")
    table = distorted_measure(args.alpha, args.level)
    _write(table.to_csv(), args.out)
    if args.figure:
        from .plotting import plot_measure
        plot_measure(table, args.figure)
    return EXIT_OK


def cmd_expand(args) -> int:
    system = _load_system(args.system) if args.system else haar_build(args.alpha, args.level, side=args.side)
    try:
        with open(args.matrix) as fh:
            x = matrix_from_json(json.load(fh))
    except (OSError, ValueError, KeyError) as exc:
        raise UsageError(f"cannot read matrix {args.matrix}: {exc}") from exc
    if x.shape[0] != system.dim:
        raise UsageError(f"matrix has dim {x.shape[0]}, system has dim {system.dim}")
    c = haar_analyze(system, x)
    resid = schatten_norm(haar_synthesize(system, c) - x, math.inf)
    obj = {"system": system.to_json(), "coefficients": [[float(z.real), float(z.imag)] for z in c],
           "residual": resid}
    _write(json.dumps(obj, indent=1) + "\n", args.out)
    return EXIT_OK


def cmd_explore_rademacher(args) -> int:
    """Random-sign ratios for the tensor-slot Rademacher sequence (exploratory, uncertified)."""
    from .haar import standard_quad
    from .matcore import weighted_norm

    seed = default_seed() if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    q = standard_quad(args.alpha, args.side).r
    w = Weight(args.alpha, args.level)
    spec = NormSpec(args.p, args.side)
    seq = []
    for s in range(args.level):
        for j in (1, 2, 3):
            seq.append(np.kron(np.kron(np.eye(2**s), q[j]), np.eye(2 ** (args.level - s - 1))))
    seq = np.array(seq)
    lines = ["trial,ratio"]
    worst = 0.0
    for t in range(args.trials):
        a = rng.standard_normal(len(seq)) + 1j * rng.standard_normal(len(seq))
        eps = rng.choice([-1.0, 1.0], size=len(seq))
        base = weighted_norm(np.tensordot(a, seq, 1), w.values, spec)
        ratio = weighted_norm(np.tensordot(eps * a, seq, 1), w.values, spec) / base
        worst = max(worst, ratio)
        lines.append(f"{t},{ratio!r}")
    _write("\n".join(lines) + "\n", args.out)
    sys.stderr.write(f"max sign-change ratio over {args.trials} trials: {worst:.6f} (exploratory)\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ncbasis", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, level_default=None):
        p.add_argument("--alpha", type=alpha_arg, default=Fraction(1, 2),
                       help="state parameter in (0, 1/2]; decimals or fractions like 1/3")
        p.add_argument("--level", type=int, default=level_default, required=level_default is None)
        p.add_argument("--seed", type=seed_arg, default=None, help="defaults to $NCBASIS_SEED, then 0xC0FFEE")
        p.add_argument("--out", default=None, help="output path (stdout if omitted)")
        p.add_argument("--unsafe-scale", action="store_true", help="lift the default level caps")

    g = sub.add_parser("gen-haar", help="build a Haar system and write its JSON")
    common(g)
    g.add_argument("--side", choices=["left", "right"], default="left")
    g.set_defaults(func=cmd_gen_haar)

    c = sub.add_parser("certify", help="estimate partial-sum norms against their bounds")
    common(c, level_default=2)
    c.add_argument("--suite", choices=["haar", "schur", "product"], default="haar")
    c.add_argument("--side", choices=["left", "right", "plain"], default="left")
    c.add_argument("--p", type=p_arg, default=1.0)
    c.add_argument("--m", default=None, help="comma-separated schedule of m values")
    c.add_argument("--system", default=None, help="HaarSystem JSON file")
    c.add_argument("--left", default=None, help="product factor: alpha=..[,level=..], units=n or trivial")
    c.add_argument("--right", default=None)
    c.add_argument("--method", choices=["combined", "sampling", "polar_ascent", "grid_oracle"], default="combined")
    c.add_argument("--samples", type=int, default=10_000)
    c.add_argument("--restarts", type=int, default=50)
    c.add_argument("--iterations", type=int, default=200)
    c.add_argument("--format", choices=["csv", "json"], default="csv")
    c.add_argument("--figure", default=None, help="also render the report as an image")
    c.add_argument("--config", default=None, help="re-run from a JSON report's embedded config")
    c.set_defaults(func=cmd_certify)

    v = sub.add_parser("verify", help="run a named invariant suite")
    common(v, level_default=2)
    v.add_argument("--suite", required=True, choices=SUITES)
    v.add_argument("--t", type=float, action="append", help="modular time (repeatable)")
    v.add_argument("--samples", type=int, default=None)
    v.add_argument("--figure", default=None)
    v.set_defaults(func=cmd_verify)

    m = sub.add_parser("measure", help="write the dyadic mass table as CSV")
    common(m)
    m.add_argument("--figure", default=None)
    m.set_defaults(func=cmd_measure)

    e = sub.add_parser("expand", help="Haar coefficients of a matrix JSON file")
    common(e, level_default=1)
    e.add_argument("--side", choices=["left", "right"], default="left")
    e.add_argument("--system", default=None)
    e.add_argument("--matrix", required=True)
    e.set_defaults(func=cmd_expand)

    r = sub.add_parser("explore-rademacher", help="sign-change ratios of the Rademacher sequence (exploratory)")
    common(r)
    r.add_argument("--side", choices=["left", "right"], default="left")
    r.add_argument("--p", type=p_arg, default=2.0)
    r.add_argument("--trials", type=int, default=200)
    r.set_defaults(func=cmd_explore_rademacher)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_USAGE
    except NumericFailure as exc:
        sys.stderr.write(f"numeric failure: {exc}\n")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
