"""Command-line entry point.

Subcommands: ``run`` executes a config-file experiment, ``list-problems``
and ``list-methods`` show the registries, ``plot-data`` derives plot-ready
CSV files from finished runs.  Exit codes: 0 success, 2 configuration error,
3 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_experiment_spec
from .errors import ConfigError
from .harness import METHOD_DESCRIPTIONS, PROBLEM_DESCRIPTIONS, run_experiment
from .plotdata import emit_plot_data

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cepmc",
                                     description="rare-event estimation experiment driver")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured experiment")
    run.add_argument("--config", required=True, help="experiment config file")
    run.add_argument("--reps", type=int, help="override replication count")
    run.add_argument("--seed", type=int, help="override master seed")
    run.add_argument("--out", help="override output directory")
    run.add_argument("--threads", type=int, help="worker threads for replications")

    sub.add_parser("list-problems", help="list registered problems")
    sub.add_parser("list-methods", help="list registered methods")

    plot = sub.add_parser("plot-data", help="emit plot-ready CSV files from run outputs")
    plot.add_argument("--from", dest="from_dir", required=True,
                      help="run directory or directory of run directories")
    plot.add_argument("--out", help="output directory (defaults to --from)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "list-problems":
            for name, desc in sorted(PROBLEM_DESCRIPTIONS.items()):
                print(f"{name:12s} {desc}")
            return EXIT_OK
        if args.command == "list-methods":
            for name, desc in sorted(METHOD_DESCRIPTIONS.items()):
                print(f"{name:12s} {desc}")
            return EXIT_OK
        if args.command == "plot-data":
            return _cmd_plot_data(args)
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


def _cmd_run(args) -> int:
    overrides = {}
    if args.reps is not None:
        overrides["replications"] = args.reps
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if args.threads is not None:
        overrides["threads"] = args.threads
    spec = load_experiment_spec(args.config, overrides)
    outputs = run_experiment(spec)
    summary = outputs.summary
    print(f"{spec.experiment_id}: {spec.method} on {spec.problem_name} "
          f"x{spec.replications} reps -> {outputs.results_path}")
    print(f"  mean_estimate={summary['mean_estimate'] or 'n/a'} "
          f"rrmse={summary['rrmse'] or 'n/a'} errors={summary['n_errors']}")
    return EXIT_OK


def _cmd_plot_data(args) -> int:
    from_dir = Path(args.from_dir)
    if not from_dir.exists():
        raise ConfigError(f"no such directory: {from_dir}")
    written = emit_plot_data(from_dir, args.out)
    for path in written:
        print(path)
    if not written:
        print("no run outputs found; nothing to do")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
