import argparse

from app.commands import add_common_arguments, config_from_args
from app.harness import run_divergence_experiment
from app.output import open_output, write_rows
from app.schemas import TraceRow


def run(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    rows = run_divergence_experiment(config, cycles=args.cycles)
    with open_output(args.out) as stream:
        write_rows(rows, stream, config.output.format, TraceRow)
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("simulate", help="divergence traces on synthetic convex learners")
    add_common_arguments(parser)
    parser.add_argument("--cycles", type=int, help="aggregation cycles (default: simulation.cycles)")
    parser.set_defaults(handler=run)
