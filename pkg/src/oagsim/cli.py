"""Command-line entry point.

Exit codes: 0 success, 1 check failure, 2 configuration or input error,
3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Optional, Sequence

from . import harness
from .core import InvalidParam, OagError, harmonic_number
from .formats import format_rational

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# -- value parsing ----------------------------------------------------------------


def parse_probability(text: str) -> Fraction:
    try:
        value = Fraction(Decimal(text))
    except (InvalidOperation, ValueError):
        raise ConfigError(f"not a number: {text!r}") from None
    if not 0 <= value <= 1:
        raise ConfigError(f"{text} is outside [0, 1]")
    return value


def parse_grid(text: str) -> list[Fraction]:
    """``a:b:step`` with inclusive endpoints, or a single value."""
    parts = text.split(":")
    if len(parts) == 1:
        return [parse_probability(parts[0])]
    if len(parts) != 3:
        raise ConfigError(f"grid must look like a:b:step, got {text!r}")
    lo, hi = parse_probability(parts[0]), parse_probability(parts[1])
    try:
        step = Fraction(Decimal(parts[2]))
    except (InvalidOperation, ValueError):
        raise ConfigError(f"bad grid step {parts[2]!r}") from None
    if step <= 0 or hi < lo:
        raise ConfigError(f"grid {text!r} needs a < b (or a = b) and step > 0")
    count = math.floor((hi - lo) / step)
    values = [lo + i * step for i in range(count + 1)]
    if values[-1] != hi:
        values.append(hi)
    return values


def parse_value(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            pass
    return text


def parse_generator(tokens: Optional[Sequence[str]]) -> tuple[Optional[str], dict]:
    if not tokens:
        return None, {}
    name, params = tokens[0], {}
    for tok in tokens[1:]:
        key, sep, value = tok.partition("=")
        if not sep or not key:
            raise ConfigError(f"generator parameter must be key=value, got {tok!r}")
        params[key] = parse_value(value)
    return name, params


def default_seed() -> int:
    raw = os.environ.get("OAG_SEED")
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"OAG_SEED must be an integer, got {raw!r}") from None


# -- parser ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="oag", description="Simulate DTB-compiled online algorithms under unreliable guidance.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def experiment_flags(p, grid: bool):
        p.add_argument("--problem", choices=sorted(harness.KITS))
        p.add_argument("--trials", type=int, default=None)
        p.add_argument("--seed", type=int, default=None, help="master seed (default: $OAG_SEED or 0)")
        p.add_argument("--generator", nargs="+", metavar="NAME [key=val ...]")
        p.add_argument("--instance", help="instance file instead of a generator")
        p.add_argument("--adversary")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--out", required=True)
        p.add_argument("--from-csv", help="re-run the experiment echoed in a CSV header")
        if grid:
            p.add_argument("--beta-grid", default="0:1:0.25")
            p.add_argument("--tau-grid", default="0:1:0.25")
            p.add_argument("--plot", help="also write an SVG plot")
        else:
            p.add_argument("--beta", default="0")
            p.add_argument("--tau", default="0")

    experiment_flags(sub.add_parser("run", help="trial records at one (beta, tau)"), grid=False)
    experiment_flags(sub.add_parser("sweep", help="estimates over a (beta, tau) grid"), grid=True)

    p = sub.add_parser("bound", help="tabulate the closed-form bounds")
    p.add_argument("--problem", choices=sorted(harness.KITS), required=True)
    p.add_argument("--beta-grid", default="0:1:0.25")
    p.add_argument("--tau-grid", default="0:1:0.25")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--out", help="CSV path (default: stdout)")

    p = sub.add_parser("oracle-check", help="exact enumeration vs Monte-Carlo and bounds")
    p.add_argument("--trials", type=int, default=10**5)
    p.add_argument("--budget", type=int, default=10**6)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--problem", choices=sorted(harness.KITS), action="append")

    p = sub.add_parser("plot", help="plot an estimates CSV against its bound")
    p.add_argument("csv")
    p.add_argument("--out", required=True)
    return parser


# -- commands ----------------------------------------------------------------------------


def _config_from_args(args, grid: bool) -> harness.ExperimentConfig:
    if args.from_csv:
        header, _ = harness.read_csv(args.from_csv)
        if header is None:
            raise ConfigError(f"{args.from_csv} has no echoed config header")
        return harness.ExperimentConfig.from_resolved(header)
    if args.problem is None:
        raise ConfigError("--problem is required")
    if (args.generator is None) == (args.instance is None):
        raise ConfigError("give exactly one of --generator and --instance")
    name, params = parse_generator(args.generator)
    if grid:
        betas, taus = parse_grid(args.beta_grid), parse_grid(args.tau_grid)
    else:
        betas, taus = [parse_probability(args.beta)], [parse_probability(args.tau)]
    return harness.ExperimentConfig(
        problem=args.problem,
        generator=name,
        params=params,
        instance_path=args.instance,
        beta_grid=tuple(float(b) for b in betas),
        tau_grid=tuple(float(t) for t in taus),
        trials=args.trials if args.trials is not None else (1 if not grid else 10**4),
        master_seed=args.seed if args.seed is not None else default_seed(),
        adversary=args.adversary,
        threads=args.threads,
    )


def cmd_run(args) -> int:
    config = _config_from_args(args, grid=False)
    harness.check_seed_collisions(config)
    records = list(harness.run_grid(config))
    harness.emit_csv(records, args.out, header=config.resolved(), kind="records")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _config_from_args(args, grid=True)
    harness.check_seed_collisions(config)
    instance = harness.build_instance(config)
    rows = harness.sweep(config, instance)
    harness.emit_csv(rows, args.out, header=config.resolved(), kind="estimates")
    if args.plot:
        spec = harness.get_kit(config.problem).bound_spec(instance)
        _, data = harness.read_csv(args.out)
        harness.emit_plot(data, spec, args.plot)
    return EXIT_OK


def table_endpoints(problem: str, tau, k: int = 10, n: int = 8) -> dict:
    """Consistency (beta = 0) and robustness (beta = 1) expressions for 0 < tau < 1."""
    if problem == "matching":
        x = 1 - float(tau)
        return {"consistency": -math.expm1(-x) / x, "robustness": max(0.5, -math.expm1(-x))}
    if problem == "caching":
        h = harmonic_number(k)
        return {"consistency": min(2 / tau, 2 * h), "robustness": min(2 * h / (1 - tau), Fraction(k))}
    h = harmonic_number(n)
    return {
        "consistency": 2 + 2 * min(1 / tau, (1 - tau) * h),
        "robustness": 2 + 2 * min(h / (1 - tau), Fraction(n - 1)),
    }


def bound_table(problem: str, betas, taus, k: int, n: int) -> list[dict]:
    kit = harness.get_kit(problem)
    if problem == "caching":
        evaluator = lambda b, t: harness.caching.bound_caching(b, t, k)
    elif problem == "mts":
        evaluator = lambda b, t: harness.mts.bound_mts(b, t, n)
    else:
        evaluator = harness.matching.bound_matching
    rows = []
    for beta in betas:
        for tau in taus:
            value = evaluator(beta, tau)
            exact = value if isinstance(value, Fraction) else None
            note = {0: "consistency", 1: "robustness"}.get(beta, "")
            rows.append(
                {
                    "problem": problem,
                    "beta": harness.fmt(beta),
                    "tau": harness.fmt(tau),
                    "bound": harness.fmt(value),
                    "bound_exact": "" if exact is None else format_rational(exact),
                    "direction": "lower" if kit.objective.value == "maximize" else "upper",
                    "endpoint": note,
                }
            )
    return rows


BOUND_COLUMNS = ["problem", "beta", "tau", "bound", "bound_exact", "direction", "endpoint"]


def cmd_bound(args) -> int:
    if args.k < 1 or args.n < 1:
        raise ConfigError("--k and --n must be >= 1")
    rows = bound_table(args.problem, parse_grid(args.beta_grid), parse_grid(args.tau_grid), args.k, args.n)
    header = {"problem": args.problem, "beta_grid": args.beta_grid, "tau_grid": args.tau_grid, "k": args.k, "n": args.n}
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        out.write("# config: " + json.dumps(header, sort_keys=True) + "\n")
        writer = csv.DictWriter(out, BOUND_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    seed = args.seed if args.seed is not None else default_seed()
    if args.trials < 0 or args.budget < 1:
        raise ConfigError("--trials must be >= 0 and --budget >= 1")
    cases, marginals = harness.oracle_check(args.trials, args.budget, seed, problems=args.problem)
    failed = 0
    for c in cases:
        status = "ok" if c.passed else "FAIL"
        failed += not c.passed
        mc = "" if c.mc_mean is None else f" mc={float(c.mc_mean):.6f}+-{c.mc_stderr:.2g}"
        print(
            f"{status} {c.problem:8s} {c.adversary:18s} beta={c.beta} tau={c.tau} "
            f"exact={float(c.exact):.6f} opt={c.opt} bound={float(c.bound):.6f}{mc}"
        )
    for tau, observed, sigma, ok in marginals:
        failed += not ok
        print(f"{'ok' if ok else 'FAIL'} trust-marginal tau={tau} observed={observed:.5f} sigma={sigma:.2g}")
    print(f"{len(cases) + len(marginals) - failed} passed, {failed} failed")
    return EXIT_OK if failed == 0 else EXIT_CHECK


def cmd_plot(args) -> int:
    _, rows = harness.read_csv(args.csv)
    if not rows or "mean_ratio" not in rows[0]:
        raise ConfigError(f"{args.csv} is not an estimates CSV")
    harness.emit_plot(rows, None, args.out)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "bound": cmd_bound, "oracle-check": cmd_oracle_check, "plot": cmd_plot}


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except (ConfigError, InvalidParam, harness.TooLarge, FileNotFoundError, IsADirectoryError, json.JSONDecodeError) as exc:
        print(f"oag: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OagError, OSError, ArithmeticError, AssertionError) as exc:
        print(f"oag: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
