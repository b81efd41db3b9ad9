"""Command-line front end.

Subcommands: ``test`` (exposure-model interaction test on a CSV dataset),
``reri`` (prospective logistic comparator), ``simulate`` (Monte Carlo
power / type-1-error grids and the continuous-exposure failure
demonstration) and ``summarize`` (dataset report).

Exit codes: 0 success, 1 computation error, 2 usage error. All randomness
flows from ``--seed``. Machine-readable results go to ``--output`` (JSON by
default); a human-readable table is printed to standard output. The
``--threads`` hint (default: env ADDINT_THREADS, else 1) never changes any
result, only the schedule.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__
from .datasets import ExposureKind, Schema, load_dataset, parse_schema_file, schema_from_entries, summarize
from .errors import AddintError
from .nuisance import ModelPlan
from .pipeline import run_interaction_test
from .reri import reri_test
from .simulate import (
    Scenario,
    load_grid,
    run_power_experiment,
    run_reri_failure_experiment,
)

USAGE_ERROR = 2
COMPUTE_ERROR = 1


def _add_dataset_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--data", required=True, help="input CSV file with a header row")
    parser.add_argument(
        "--schema",
        help="plain-text schema file (role = column lines); alternative to the inline flags",
    )
    parser.add_argument("--outcome", help="outcome column (0/1, 1 = case)")
    parser.add_argument("--a1", help="first exposure column")
    parser.add_argument("--a2", help="second exposure column")
    parser.add_argument("--kind-a1", help="binary | categorical:K | count | continuous")
    parser.add_argument("--kind-a2", help="binary | categorical:K | count | continuous")
    parser.add_argument("--covariates", default="", help="comma-separated covariate columns")
    parser.add_argument("--weight-col", help="optional positive sampling-weight column")


def _schema_from_args(args) -> Schema:
    if args.schema:
        inline = [args.outcome, args.a1, args.a2, args.kind_a1, args.kind_a2]
        if any(v for v in inline) or args.covariates or args.weight_col:
            raise AddintError("give either --schema or the inline schema flags, not both")
        return parse_schema_file(args.schema)
    entries = {
        "outcome": args.outcome or "",
        "a1": args.a1 or "",
        "a2": args.a2 or "",
        "kind.a1": args.kind_a1 or "",
        "kind.a2": args.kind_a2 or "",
        "covariates": args.covariates,
    }
    if args.weight_col:
        entries["weight"] = args.weight_col
    return schema_from_entries(entries)


def _write_output(payload: dict, path: str | None) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _default_threads() -> int:
    env = os.environ.get("ADDINT_THREADS", "").strip()
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise AddintError(f"ADDINT_THREADS={env!r} is not an integer") from None
    return 1


def _cmd_test(args) -> int:
    schema = _schema_from_args(args)
    ds = load_dataset(args.data, schema)
    plan = ModelPlan(
        covariates=tuple(schema.covariates) if schema.covariates else None,
        a2_family=args.a2_family,
        independence=args.independence,
    )
    result = run_interaction_test(
        ds,
        plan,
        variance=args.variance,
        bootstrap_replicates=args.bootstrap,
        seed=args.seed,
        bootstrap_stratified=args.bootstrap_stratified == "on",
        threads=args.threads,
    )
    payload = result.to_json_dict()
    _write_output(payload, args.output)
    print(
        f"method={result.method} statistic={result.statistic:.6f} "
        f"p={result.p_value:.6g} variance={result.variance.total:.6g} "
        f"(v1={result.variance.v1:.3g} v2={result.variance.v2:.3g} v3={result.variance.v3:.3g})",
        file=sys.stderr,
    )
    return 0


def _cmd_reri(args) -> int:
    schema = _schema_from_args(args)
    ds = load_dataset(args.data, schema)
    covariates = tuple(schema.covariates) if schema.covariates else None
    result = reri_test(ds, covariates=covariates)
    _write_output(result.to_json_dict(), args.output)
    print(
        f"reri={result.reri_hat:.6f} se={result.se:.6f} "
        f"statistic={result.t_reri:.6f} p={result.p_value:.6g}",
        file=sys.stderr,
    )
    return 0


def _cmd_summarize(args) -> int:
    schema = _schema_from_args(args)
    ds = load_dataset(args.data, schema)
    report = summarize(ds)
    print(report.to_text())
    if args.output:
        _write_output(
            {
                "schema_version": 1,
                "n": report.n,
                "n_cases": report.n_cases,
                "n_controls": report.n_controls,
                "usable": report.usable,
                "reason": report.reason,
                "exposures": report.exposures,
            },
            args.output,
        )
    return 0


def _cmd_simulate(args) -> int:
    tests = tuple(t.strip() for t in args.tests.split(",") if t.strip())
    if args.mode == "power":
        if not args.grid:
            raise AddintError("simulate --mode power needs --grid")
        grid = load_grid(args.grid)
        table = run_power_experiment(
            grid,
            tests=tests,
            reps=args.reps,
            seed=args.seed,
            alpha=args.alpha,
            threads=args.threads,
        )
        if args.output_csv:
            table.to_csv(args.output_csv)
        _write_output(table.to_json_dict(), args.output)
        for row in table.rows:
            print(
                f"{row.cell:24s} {row.test:6s} rate={row.rate:.4f} "
                f"mc_se={row.mc_se:.4f} failures={row.failures}"
                + (" FLAGGED" if row.flagged else ""),
                file=sys.stderr,
            )
        return 0
    # reri-failure mode
    config = None
    if args.grid:
        cells = [sc for sc in load_grid(args.grid) if sc.kind == "continuous-null-failure"]
        if not cells:
            raise AddintError("grid file has no continuous-null-failure cell")
        config = cells[0]
    report = run_reri_failure_experiment(
        config,
        reps=args.reps,
        seed=args.seed,
        alpha=args.alpha,
        dichotomize=args.dichotomize,
        threads=args.threads,
    )
    _write_output(report.to_json_dict(), args.output)
    for test, stats in report.sizes.items():
        print(f"{test:16s} size={stats['size']:.4f} mc_se={stats['mc_se']:.4f}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="addint",
        description="Additive interaction tests for case-control studies",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_test = sub.add_parser("test", help="exposure-model interaction test on a CSV dataset")
    _add_dataset_args(p_test)
    p_test.add_argument(
        "--independence",
        action="store_true",
        help="assume the exposures independent given covariates (pins the odds-ratio parameter to 0)",
    )
    p_test.add_argument(
        "--a2-family",
        default="auto",
        choices=["auto", "logit", "identity", "log"],
        help="baseline model family for a2 (default: by exposure kind)",
    )
    p_test.add_argument(
        "--variance",
        default="auto",
        choices=["auto", "closed-form", "sandwich", "bootstrap"],
        help="variance engine (auto: closed form for the independence binary case, else sandwich)",
    )
    p_test.add_argument("--bootstrap", type=int, nargs="?", const=1000, default=None, metavar="B",
                        help="attach a B-replicate bootstrap CI and p-value (B=1000 if given bare)")
    p_test.add_argument("--bootstrap-stratified", choices=["on", "off"], default="on")
    p_test.add_argument("--seed", type=int, default=0)
    p_test.add_argument("--threads", type=int, default=_default_threads())
    p_test.add_argument("--output", help="write the JSON result here instead of stdout")
    p_test.set_defaults(func=_cmd_test)

    p_reri = sub.add_parser("reri", help="prospective logistic excess-risk comparator")
    _add_dataset_args(p_reri)
    p_reri.add_argument("--output", help="write the JSON result here instead of stdout")
    p_reri.set_defaults(func=_cmd_reri)

    p_sum = sub.add_parser("summarize", help="dataset report")
    _add_dataset_args(p_sum)
    p_sum.add_argument("--output", help="also write a JSON report here")
    p_sum.set_defaults(func=_cmd_summarize)

    p_sim = sub.add_parser("simulate", help="Monte Carlo experiments")
    p_sim.add_argument("--mode", choices=["power", "reri-failure"], default="power")
    p_sim.add_argument("--grid", help="INI-style scenario grid file")
    p_sim.add_argument("--reps", type=int, default=2000)
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--alpha", type=float, default=0.05)
    p_sim.add_argument("--tests", default="u,u-ind,prosp")
    p_sim.add_argument("--dichotomize", action="store_true",
                       help="reri-failure mode: threshold the continuous exposure at 0 first")
    p_sim.add_argument("--threads", type=int, default=_default_threads())
    p_sim.add_argument("--output", help="write the JSON summary here instead of stdout")
    p_sim.add_argument("--output-csv", help="power mode: also write one CSV row per cell and test")
    p_sim.set_defaults(func=_cmd_simulate)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help/--version, 2 for usage errors
        return int(exc.code or 0)
    try:
        return args.func(args)
    except AddintError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return COMPUTE_ERROR
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return COMPUTE_ERROR


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
