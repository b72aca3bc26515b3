"""Command-line entry point: ``medlit <stage> --config run.cfg``.

Exit status is 0 on success, 1 for validation errors (bad input, bad
config, missing upstream stage) and 2 for runtime or numerical failures.
"""

import argparse
import logging
import sys

from . import __version__
from .config import load_config
from .exceptions import NumericalError, ValidationError
from .pipeline import STAGES, run_stage

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _gradcheck(args):
    from .gradcheck import logistic_check, skipgram_check, tagger_suite

    tagger = tagger_suite(n_seeds=args.seeds)
    worst = max(tagger, key=lambda r: r.max_rel_error)
    checks = [
        (f"BLSTM tagger ({args.seeds} random models)", worst),
        ("skip-gram negative sampling", skipgram_check()),
        ("logistic log-loss", logistic_check()),
    ]
    ok = True
    for name, report in checks:
        status = "PASS" if report.passed else "FAIL"
        ok &= report.passed
        print(f"{status}  {name}: max relative error {report.max_rel_error:.3e} "
              f"(tolerance {report.tolerance:.0e}, worst {report.worst_coordinate})")
    return EXIT_OK if ok else EXIT_RUNTIME


def build_parser():
    parser = argparse.ArgumentParser(prog="medlit", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for stage in STAGES + ("all",):
        p = sub.add_parser(stage, help=f"run the {stage} stage" if stage != "all" else "run every stage")
        p.add_argument("-c", "--config", help="key = value config file")
        p.add_argument("-s", "--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config value (repeatable)")
        p.add_argument("-o", "--output-dir", help="shorthand for --set output_dir=DIR")
        p.add_argument("--seed", type=int, help="shorthand for --set seed=N")
        p.add_argument("-v", "--verbose", action="store_true")
    g = sub.add_parser("gradcheck", help="run the finite-difference gradient suites")
    g.add_argument("--seeds", type=int, default=20)
    g.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gradcheck":
            return _gradcheck(args)
        overrides = list(args.set)
        if args.output_dir:
            overrides.append(f"output_dir={args.output_dir}")
        if args.seed is not None:
            overrides.append(f"seed={args.seed}")
        config = load_config(args.config, overrides)
        run_stage(config, args.command)
        if args.command in ("evaluate", "all"):
            sys.stdout.write((config.output_dir / "report.txt").read_text(encoding="utf-8"))
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (NumericalError, OSError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
