"""Command-line entry point: ``lenslesstools {simulate,reconstruct,study,evaluate}``."""

import argparse
import os
import sys
import traceback

import numpy as np

from . import api
from .config import ExperimentConfig, read_config
from .version import __version__

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4


def _seed(text):
    value = int(text)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(
            "Expected a seed in [0, 2^64), got {}".format(text)
        )
    return value


def _threads(text):
    value = int(text)
    if value == 0:
        raise argparse.ArgumentTypeError("Expected a nonzero thread count")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("--seed", metavar="U64", type=_seed, help="random seed")
    common.add_argument(
        "--threads",
        metavar="K",
        type=_threads,
        help="worker threads (-1 uses every core)",
    )
    common.add_argument(
        "-v",
        "--verbose",
        action="count",
        default=0,
        help="more logging; twice also prints tracebacks",
    )

    parser = argparse.ArgumentParser(
        prog="lenslesstools",
        description="Simulate and reconstruct lensless 3D imaging under coded illumination",
    )
    parser.add_argument(
        "--version", action="version", version="%(prog)s {}".format(__version__)
    )
    commands = parser.add_subparsers(dest="command", metavar="COMMAND")
    commands.required = True

    commands.add_parser(
        "simulate", parents=[common], help="simulate measurements of a scene"
    )
    reconstruct = commands.add_parser(
        "reconstruct", parents=[common], help="reconstruct a volume from measurements"
    )
    reconstruct.add_argument(
        "--input",
        metavar="PATH",
        help="simulation directory or measurement file (default: output directory)",
    )
    study = commands.add_parser(
        "study", parents=[common], help="run a simulation study and write its CSV"
    )
    study.add_argument(
        "--study", metavar="NAME", required=True, choices=sorted(api.STUDIES)
    )
    evaluate = commands.add_parser(
        "evaluate", parents=[common], help="score a reconstruction against ground truth"
    )
    evaluate.add_argument(
        "--volume",
        metavar="PATH",
        help="reconstructed volume (default: volume.llv in the output directory)",
    )
    evaluate.add_argument(
        "--reference",
        metavar="PATH",
        help="ground-truth volume (default: ground_truth.llv in the output directory)",
    )
    return parser


def load_config(args):
    """Defaults, then the config file, then command-line overrides"""
    config = read_config(args.config) if args.config else ExperimentConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["n_jobs"] = args.threads
    return config.copy(**overrides).validate()


def _run(args):
    config = load_config(args)
    verbose = 1 + args.verbose
    out_dir = api.output_dir(config, args.out)
    if args.command == "simulate":
        paths = api.run_simulate(config, out=out_dir, verbose=verbose)
        print(os.path.dirname(paths["measurements"]))
    elif args.command == "reconstruct":
        source = args.input if args.input is not None else out_dir
        paths, report = api.run_reconstruct(
            config, source, out=out_dir, verbose=verbose
        )
        print(
            "{}: {} iterations ({}), objective {:.6g}".format(
                os.path.dirname(paths["volume"]),
                report.iterations,
                report.stop_reason,
                report.final_objective,
            )
        )
    elif args.command == "study":
        table = api.run_study(args.study, config, out=out_dir, verbose=verbose)
        print(table.to_string(index=False))
    else:
        volume = args.volume or os.path.join(out_dir, api.VOLUME_FILE)
        reference = args.reference or os.path.join(out_dir, api.GROUND_TRUTH_FILE)
        report = api.run_evaluate(config, volume, reference, out=out_dir, verbose=verbose)
        print("depth_rmse_cm = {:.6f}\nssim = {:.6f}".format(report.depth_rmse, report.ssim))


def main(argv=None):
    """Run the command line and return its exit code

    0 on success, 2 for configuration errors, 3 for file errors and 4 for
    numerical failures.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code
    try:
        _run(args)
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        code = EXIT_NUMERICAL
        error = e
    except OSError as e:
        code = EXIT_IO
        error = e
    except ValueError as e:
        code = EXIT_CONFIG
        error = e
    else:
        return EXIT_OK
    if args.verbose >= 2:
        traceback.print_exception(type(error), error, error.__traceback__)
    kind = {
        EXIT_CONFIG: "configuration error",
        EXIT_IO: "I/O error",
        EXIT_NUMERICAL: "numerical failure",
    }[code]
    print("lenslesstools {}: {}: {}".format(args.command, kind, error), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
