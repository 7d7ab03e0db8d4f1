"""Command-line front end.

Subcommands ``run``, ``sweep``, ``bloch`` and ``validate`` read a JSON config
(``--config``), apply ``--set key=value`` overrides in order, and write their
outputs plus the resolved ``config.json`` into ``--out``.

Exit codes: 0 success, 2 usage, 3 invalid configuration, 4 runtime or
numeric failure, 5 I/O failure.
"""

import argparse
import logging
import os
import sys

from .config import ExperimentConfig, apply_override
from .errors import AvqstError, ConfigError, ValidationError
from .harness import (alpha_sweep, atomic_write_text, export_bloch_trajectory, export_csv,
                      export_sweep_csv, run_experiment)
from .measurement import product_povm, qubit_sic_povm, validate_povm

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME, EXIT_IO = 0, 2, 3, 4, 5

log = logging.getLogger("avqst")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON experiment config")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override a config key (repeatable; "
                        "VALUE is parsed as JSON, dotted keys reach mle.* and sis.*)")
    common.add_argument("--out", metavar="DIR", default=".", help="output directory")
    common.add_argument("--seed", type=_u64, metavar="U64", help="master seed")
    common.add_argument("--progress", action="store_true",
                        help="print per-run completion counts to stderr")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = _Parser(prog="avqst", description="Anytime-valid quantum state tomography "
                     "experiments. AVQST_THREADS sets the worker count (0 = all CPUs).")
    sub = parser.add_subparsers(dest="command", metavar="{run,sweep,bloch,validate}",
                                parser_class=_Parser)
    sub.required = True
    sub.add_parser("run", parents=[common], help="miscoverage and set size over time "
                   "-> results.csv")
    sub.add_parser("sweep", parents=[common], help="miscoverage for each alpha at the "
                   "sweep times -> sweep.csv")
    sub.add_parser("bloch", parents=[common], help="single-qubit region snapshots "
                   "-> bloch.jsonl")
    sub.add_parser("validate", parents=[common], help="check the config and POVM only")
    return parser


def _u64(text):
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError(f"seed must lie in [0, 2^64): {text}")
    return v


def parse(argv):
    """Parse ``argv`` into a namespace; raises :class:`UsageError`."""
    args = build_parser().parse_args(argv)
    for item in args.overrides:
        if "=" not in item:
            raise UsageError(f"avqst: error: --set expects KEY=VALUE, got {item!r}")
    return args


def resolve_config(args):
    if args.config:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise OSError(exc.errno, f"cannot read config {args.config}: {exc.strerror}") from exc
        cfg = ExperimentConfig.from_json(text)
    else:
        cfg = ExperimentConfig()
    for item in args.overrides:
        key, raw = item.split("=", 1)
        cfg = apply_override(cfg, key.strip(), raw)
    if args.seed is not None:
        cfg = cfg.with_updates(seed=args.seed)
    return cfg.validate()


def _progress_printer(enabled):
    if not enabled:
        return None

    def show(done, total):
        print(f"runs {done}/{total}", file=sys.stderr, flush=True)

    return show


def dispatch(args):
    cfg = resolve_config(args)
    if args.command == "validate":
        problems = validate_povm(product_povm(qubit_sic_povm(), cfg.qubits))
        if problems:
            raise ValidationError("; ".join(problems))
        print(f"config ok: qubits={cfg.qubits} horizon={cfg.horizon} runs={cfg.runs}")
        return EXIT_OK

    os.makedirs(args.out, exist_ok=True)
    progress = _progress_printer(args.progress)
    if args.command == "run":
        stats = run_experiment(cfg, progress=progress)
        path = os.path.join(args.out, "results.csv")
        export_csv(stats, path)
    elif args.command == "sweep":
        stats = alpha_sweep(cfg, progress=progress)
        path = os.path.join(args.out, "sweep.csv")
        export_sweep_csv(stats, path)
    else:
        path = os.path.join(args.out, "bloch.jsonl")
        export_bloch_trajectory(cfg, path)
    atomic_write_text(os.path.join(args.out, "config.json"), cfg.to_json() + "\n")
    print(path)
    return EXIT_OK


def main(argv=None):
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parse(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help exits 0 from inside argparse
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return dispatch(args)
    except ConfigError as exc:
        print("invalid configuration:", file=sys.stderr)
        for p in exc.problems:
            print(f"  {p}", file=sys.stderr)
        return EXIT_CONFIG
    except ValidationError as exc:
        # inputs that parse but cannot be used, e.g. a Bloch export with qubits != 1
        print(f"invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc.strerror or exc}", file=sys.stderr)
        return EXIT_IO
    except (AvqstError, ArithmeticError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
