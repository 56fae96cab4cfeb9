"""
Command line entry point: `fafd sweep | compare | defaults | validate-config | oracle`.

Exit codes: 0 success, 1 a failed comparison or oracle suite, 2 a rejected
configuration or another domain error.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

from colorama import Fore, Style, init as colorama_init
from pydantic import ValidationError

from app.config.experiment import ExperimentConfig, emit_defaults, load, validate_config
from app.config.settings import LOG_LEVEL, OUTPUT_DIR
from app.exceptions import DOMAIN_ERRORS, ConfigValidationError
from app.models.results import ComparisonReport, OracleReport, PerfCurve, SweepSpec
from app.services.channel_estimation import build_pilot_budget
from app.services.experiment_service import (
    PRESETS,
    compare_engines,
    preset_specs,
    read_curve,
    run_sweep,
    write_curve,
)
from app.services.oracles import run_oracles

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_DOMAIN = 2

ENGINES = ("analytic_exact", "analytic_mean", "monte_carlo")


def _ok(text: str) -> str:
    return f"{Fore.GREEN}{text}{Style.RESET_ALL}"


def _fail(text: str) -> str:
    return f"{Fore.RED}{text}{Style.RESET_ALL}"


def _fmt(value: Optional[float]) -> str:
    return "-" if value is None else f"{value:.4g}"


def _config(args) -> ExperimentConfig:
    return load(args.config, args.set or None)


def _print_curve(curve: PerfCurve) -> None:
    print(f"{Style.BRIGHT}{curve.name}{Style.RESET_ALL} ({curve.variable})")
    for point in curve.points:
        if not point.feasible:
            print(f"  [{point.index:>3}] {point.x:<12.4g} {point.engine:<15} {Fore.YELLOW}infeasible{Style.RESET_ALL} {point.note}")
            continue
        line = (
            f"  [{point.index:>3}] {point.x:<12.4g} {point.engine:<15} "
            f"p_dl={_fmt(point.p_dl)} p_ul={_fmt(point.p_ul)} rate={_fmt(point.rate)}"
        )
        print(line + (f" {_fail(point.note)}" if point.note else ""))


def _print_comparison(report: ComparisonReport) -> None:
    print(f"{report.candidate} vs {report.reference} ({report.mode})")
    for gap in report.gaps:
        status = ""
        if gap.passed is not None:
            status = _ok("PASS") if gap.passed else _fail("FAIL")
        print(
            f"  [{gap.index:>3}] {gap.x:<12.4g} Δp_dl={_fmt(gap.gap_p_dl)} Δp_ul={_fmt(gap.gap_p_ul)} "
            f"rel Δrate={_fmt(gap.rel_gap_rate)} tol={_fmt(gap.tolerance_p)} {status}"
        )
    summary = (
        f"max Δp_dl={_fmt(report.max_gap_p_dl)} max Δp_ul={_fmt(report.max_gap_p_ul)} "
        f"max rel Δrate={_fmt(report.max_rel_gap_rate)}"
    )
    if report.passed is None:
        print(summary)
    else:
        print(summary + " " + (_ok("PASSED") if report.passed else _fail("FAILED")))


def _print_oracles(report: OracleReport) -> None:
    group = None
    for check in report.checks:
        if check.group != group:
            group = check.group
            print(f"{Style.BRIGHT}{group}{Style.RESET_ALL}")
        if check.informational:
            status = f"{Fore.YELLOW}INFO{Style.RESET_ALL}"
        else:
            status = _ok("PASS") if check.passed else _fail("FAIL")
        print(
            f"  {check.name:<48} value={check.value:.6g} reference={check.reference:.6g} "
            f"error={check.error:.2e} tol={check.tolerance:.2e} {status}"
        )
    total = sum(not c.informational for c in report.checks)
    failed = len(report.failures())
    print(_ok(f"{total} checks passed") if not failed else _fail(f"{failed} of {total} checks failed"))


def cmd_sweep(args) -> int:
    config = _config(args)
    if args.preset:
        specs = preset_specs(args.preset, args.engines)
    else:
        if not args.variable or not args.grid:
            raise ConfigValidationError(["sweep needs --preset or both --variable and --grid"])
        specs = [SweepSpec(
            name=args.name,
            variable=args.variable,
            grid=args.grid,
            engines=args.engines or ["analytic_mean"],
            metrics=args.metrics or ["outage", "rate"],
        )]
    output = Path(args.output or OUTPUT_DIR)
    for spec in specs:
        dump_dir = str(Path(args.dump_trials) / spec.name) if args.dump_trials else None
        curve = run_sweep(spec, config, dump_dir=dump_dir)
        csv_path, sidecar = write_curve(curve, output / f"{spec.name}.csv")
        _print_curve(curve)
        print(f"  -> {csv_path} ({sidecar.name})")
    return EXIT_OK


def cmd_compare(args) -> int:
    curve = read_curve(args.curve)
    report = compare_engines(curve, args.reference, args.candidate)
    _print_comparison(report)
    return EXIT_FAILED if report.passed is False else EXIT_OK


def cmd_defaults(args) -> int:
    text = emit_defaults()
    if args.output:
        Path(args.output).write_text(text)
        print(f"Defaults written to {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    config = _config(args)
    warnings = validate_config(config)
    for warning in warnings:
        print(f"{Fore.YELLOW}warning:{Style.RESET_ALL} {warning}")
    print(_ok("configuration valid"))
    return EXIT_OK


def cmd_oracle(args) -> int:
    config = _config(args)
    params, fa = config.network_params(), config.fa_geometry()
    budget = build_pilot_budget(params, fa)
    report = run_oracles(
        params, fa, budget, config.model_options(),
        rho=args.rho, n_samples=args.samples, n_blocks=args.blocks, n_draws=args.draws, seed=args.seed,
    )
    _print_oracles(report)
    return EXIT_OK if report.passed else EXIT_FAILED


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="KEY=VALUE config file (see `fafd defaults`)")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config value, e.g. --set 'P=30 dBm'")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fafd", description="Fluid-antenna full-duplex network: sweeps and engine checks")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="evaluate a curve with one or more engines")
    _add_config_args(sweep)
    sweep.add_argument("--preset", choices=PRESETS)
    sweep.add_argument("--name", default="sweep")
    sweep.add_argument("--variable", choices=["P", "N", "lambda_b", "Le", "kappa", "epsilon", "delta_phi", "theta"])
    sweep.add_argument("--grid", nargs="+", help="grid values, units allowed: --grid '0 dBm' '10 dBm'")
    sweep.add_argument("--engines", nargs="+", choices=ENGINES)
    sweep.add_argument("--metrics", nargs="+", choices=["outage", "rate"])
    sweep.add_argument("--output", help=f"output directory (default {OUTPUT_DIR})")
    sweep.add_argument("--dump-trials", metavar="DIR", help="write raw Monte Carlo trials per grid point")
    sweep.set_defaults(func=cmd_sweep)

    compare = sub.add_parser("compare", help="compare two engines of a written curve")
    compare.add_argument("curve", help="curve CSV with its provenance sidecar")
    compare.add_argument("--reference", choices=ENGINES)
    compare.add_argument("--candidate", choices=ENGINES)
    compare.set_defaults(func=cmd_compare)

    defaults = sub.add_parser("defaults", help="print the default configuration")
    defaults.add_argument("--output", help="write to a file instead of stdout")
    defaults.set_defaults(func=cmd_defaults)

    validate = sub.add_parser("validate-config", help="check a configuration without computing")
    _add_config_args(validate)
    validate.set_defaults(func=cmd_validate)

    oracle = sub.add_parser("oracle", help="run the interference, pilot and cdf oracles")
    _add_config_args(oracle)
    oracle.add_argument("--rho", type=float, help="serving distance in m")
    oracle.add_argument("--samples", type=int, default=100_000)
    oracle.add_argument("--blocks", type=int, default=20_000)
    oracle.add_argument("--draws", type=int, default=1_000_000)
    oracle.add_argument("--seed", type=int, default=0)
    oracle.set_defaults(func=cmd_oracle)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    colorama_init()
    logging.basicConfig(
        level=getattr(logging, LOG_LEVEL.upper(), logging.INFO),
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigValidationError as e:
        print(_fail("configuration rejected:"), file=sys.stderr)
        for issue in e.issues:
            print(f"  - {issue}", file=sys.stderr)
        return EXIT_DOMAIN
    except ValidationError as e:
        print(_fail("invalid sweep:"), file=sys.stderr)
        for entry in e.errors():
            print(f"  - {'.'.join(str(p) for p in entry['loc'])}: {entry['msg']}", file=sys.stderr)
        return EXIT_DOMAIN
    except DOMAIN_ERRORS as e:
        logger.error(f"{args.command} failed: {e}")
        print(_fail(f"error: {e}"), file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
