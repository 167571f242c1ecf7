"""
CLI subcommands.

Each module exposes `register(subparsers)`, which adds its parser and binds
`handler`, a callable taking the parsed arguments and returning an exit code:
- solve: one instance, allocation and relaxed optimum
- sweep: staleness over a K x T x seed grid
- oracle: SAI against the exhaustive optimum
- simulate: divergence traces on synthetic convex learners
- profile: per-learner time coefficients and time split
"""
import argparse
from typing import Any, Dict

from app.harness import load_config
from app.schemas import OutputFormat, RunConfig


def add_common_arguments(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="experiment config file (dotted key = value lines)")
    parser.add_argument("--seed", type=int, help="override the scenario seed and the sweep seed list")
    parser.add_argument("--out", help="write results to this file instead of stdout")
    parser.add_argument(
        "--format",
        choices=[fmt.value for fmt in OutputFormat],
        help="result format (default: output.format from the config, else csv)",
    )


def config_from_args(args: argparse.Namespace) -> RunConfig:
    overrides: Dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
        overrides["sweep.seeds"] = [args.seed]
    if args.format is not None:
        overrides["output.format"] = args.format
    return load_config(args.config, overrides)
