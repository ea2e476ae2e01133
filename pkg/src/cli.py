"""
Command line interface.

Sub-commands:
    simulate         run one cell (scheme, lambda_max) for a single seed
    sweep            run the full (scheme, lambda_max) grid
    plotdata         project an aggregate table onto figure series
    validate-config  check an experiment file
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import pandas as pd
import yaml

from config.config import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, setup_logging
from src.models import InvalidParameters, Scheme
from src.runner import (
    LAMBDA_CURVE, PLOT_KINDS, RETURN_DIST, RETURN_DIST_LAMBDA, Cell, ReturnSource,
    cell_params, compare_return_distributions, derive_seed, emit_plot_data, load_aggregate,
    load_config, run_row, run_simulation, sweep, validate_config
)
from src.utils import resolve_workers, write_table

logger = logging.getLogger(__name__)

PLOT_CHOICES = tuple(PLOT_KINDS) + (RETURN_DIST, LAMBDA_CURVE)


def _add_config_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="YAML experiment file")
    parser.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE",
                        help="override a config value, e.g. params.sigma_n=0.03")
    parser.add_argument("--steps", type=int, default=None, help="timesteps per run")
    parser.add_argument("--seed", type=int, default=None, help="master seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="levsim",
        description="Leveraged value investors under three credit regulation schemes",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="run one seed of one cell")
    _add_config_arguments(simulate)
    simulate.add_argument("--scheme", default="unregulated",
                          help=f"one of {', '.join(s.value for s in Scheme)}")
    simulate.add_argument("--lambda-max", type=float, default=None, help="leverage cap")
    simulate.add_argument("--run-index", type=int, default=0, help="seed index within the cell")
    simulate.add_argument("--trace", type=Path, default=None, help="write the step trace here")
    simulate.add_argument("--output", type=Path, default=None, help="write the run row here")

    run_sweep = commands.add_parser("sweep", help="run the full grid")
    _add_config_arguments(run_sweep)
    run_sweep.add_argument("--n-runs", type=int, default=None, help="seeds per cell")
    run_sweep.add_argument("--workers", type=int, default=None, help="worker processes")
    run_sweep.add_argument("--output-dir", type=Path, default=None, help="output directory")

    plot = commands.add_parser("plotdata", help="write figure series from an aggregate table")
    plot.add_argument("--output-dir", type=Path, required=True, help="sweep output directory")
    plot.add_argument("--kind", action="append", default=[],
                      help=f"one of {', '.join(PLOT_CHOICES)}, or 'all'")
    plot.add_argument("--lambda-max", type=float, default=RETURN_DIST_LAMBDA,
                      help="cell used by returnDist, nominal cap of lambdaCurve")
    plot.add_argument("--compare", action="append", default=[],
                      metavar="LABEL=DIR:SCHEME:LAMBDA",
                      help="add a cell histogram to plots/returnCompare.csv")
    plot.add_argument("--config", type=Path, default=None, help="parameters for lambdaCurve")
    plot.add_argument("--set", dest="overrides", action="append", default=[],
                      metavar="KEY=VALUE")

    check = commands.add_parser("validate-config", help="check an experiment file")
    check.add_argument("--config", type=Path, required=True, help="YAML experiment file")
    check.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="KEY=VALUE")
    return parser


def _load(args: argparse.Namespace):
    overrides = list(args.overrides)
    if args.steps is not None:
        overrides.append(f"steps={args.steps}")
    if args.seed is not None:
        overrides.append(f"master_seed={args.seed}")
    if getattr(args, "n_runs", None) is not None:
        overrides.append(f"n_runs={args.n_runs}")
    config = load_config(args.config, overrides)
    if getattr(args, "output_dir", None) is not None:
        config.output_dir = args.output_dir
    return config


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _load(args)
    scheme = Scheme.parse(args.scheme)
    lambda_max = args.lambda_max if args.lambda_max is not None else config.params.lambda_max
    params = cell_params(config.params, Cell(scheme, lambda_max)).validate()
    seed = derive_seed(config.master_seed, scheme, lambda_max, args.run_index)
    result = run_simulation(params, seed, config.steps, config.root_method,
                            trace=args.trace is not None)
    if args.trace is not None and result.trace is not None:
        write_table(result.trace, args.trace, {"scheme": scheme.value,
                                               "lambda_max": f"{lambda_max:g}"})
    if args.output is not None:
        write_table(pd.DataFrame([run_row(args.run_index, result, params.betas)]),
                    args.output, {"scheme": scheme.value, "lambda_max": f"{lambda_max:g}"})
    if not result.ok:
        print(f"Run failed: {result.error}")
        return EXIT_FAILURE
    for key, value in result.metrics.scalars().items():
        print(f"{key}={value:.10g}")
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _load(args)
    config.workers = resolve_workers(args.workers, config.workers)
    result = sweep(config)
    print(f"Wrote {len(result.aggregate)} rows to {result.path} "
          f"({result.n_failed} failed runs)")
    return EXIT_FAILURE if result.n_failed else EXIT_OK


def cmd_plotdata(args: argparse.Namespace) -> int:
    kinds = args.kind or ([] if args.compare else ["all"])
    if "all" in kinds:
        kinds = list(PLOT_CHOICES)
    unknown = [kind for kind in kinds if kind not in PLOT_CHOICES]
    if unknown:
        raise ValueError(f"Unknown plot kind '{unknown[0]}'; "
                         f"valid kinds: {', '.join(PLOT_CHOICES)}")

    table, source = None, None
    if any(kind != LAMBDA_CURVE for kind in kinds):
        table, source = load_aggregate(args.output_dir)
    params = load_config(args.config, args.overrides).params
    for kind in kinds:
        path = emit_plot_data(table, kind, args.output_dir, args.lambda_max, source, params)
        print(f"Wrote {path}")
    if args.compare:
        sources = [ReturnSource.parse(text) for text in args.compare]
        print(f"Wrote {compare_return_distributions(sources, args.output_dir)}")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    success, message = validate_config(args.config, args.overrides)
    print(message)
    return EXIT_OK if success else EXIT_FAILURE


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "plotdata": cmd_plotdata,
    "validate-config": cmd_validate,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Parse arguments and dispatch to a sub-command.

    Returns:
        Exit code: 0 success, 1 failed run or invalid input, 2 usage error
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    setup_logging(logging.DEBUG if args.verbose else logging.INFO)

    try:
        return COMMANDS[args.command](args)
    except (InvalidParameters, yaml.YAMLError) as e:
        logger.error("Invalid configuration: %s", e)
        return EXIT_FAILURE
    except ValueError as e:
        logger.error("%s", e)
        return EXIT_FAILURE
    except OSError as e:
        logger.error("I/O error: %s", e)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
