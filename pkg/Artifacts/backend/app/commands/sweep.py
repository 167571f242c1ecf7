import argparse

from app.commands import add_common_arguments, config_from_args
from app.harness import run_sweep
from app.output import open_output, write_rows
from app.schemas import SweepRow


def run(args: argparse.Namespace) -> int:
    config = config_from_args(args)
    result = run_sweep(config, workers=args.workers)
    with open_output(args.out) as stream:
        write_rows(result.rows, stream, config.output.format, SweepRow)
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("sweep", help="staleness over a K x T x seed grid")
    add_common_arguments(parser)
    parser.add_argument("--workers", type=int, help="process pool size (default: MEL_SWEEP_WORKERS)")
    parser.set_defaults(handler=run)
