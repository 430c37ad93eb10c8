"""Command-line entry point.

    beamform run --config exp.cfg [--out results.csv] [--seed N] [--trials N] [--plot plot.py] [--jobs N]
    beamform validate --config exp.cfg

Exit codes: 0 success, 2 configuration error, 3 trials dropped after a
solver abort (the CSV still holds the surviving trials), 1 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .harness import ConfigError, emit_csv, emit_plot_script, load, run_experiment, validate, write_csv

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3


def _parser():
    ap = argparse.ArgumentParser(prog="beamform", description="Robust adaptive beamforming experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run a Monte-Carlo experiment")
    run.add_argument("--config", required=True)
    run.add_argument("--out", help="CSV path (default: stdout)")
    run.add_argument("--seed", type=int, help="override run.seed")
    run.add_argument("--trials", type=int, help="override run.trials")
    run.add_argument("--plot", help="also write a matplotlib script rendering the CSV")
    run.add_argument("--jobs", type=int, default=1, help="worker processes for trials")
    val = sub.add_parser("validate", help="check a config file without running it")
    val.add_argument("--config", required=True)
    return ap


def _cmd_run(args) -> int:
    cfg = load(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    validate(cfg)
    result = run_experiment(cfg, jobs=max(1, args.jobs))
    for a in result.aborted:
        print(f"trial {a.trial} dropped: {a.algorithm} aborted: {a.reason}", file=sys.stderr)
    if result.rows:
        if args.out:
            emit_csv(result.rows, args.out)
        else:
            write_csv(result.rows, sys.stdout)
        if args.plot:
            emit_plot_script(result.rows, args.plot, args.out or "results.csv", cfg.kind)
    if result.aborted:
        print(f"{len(result.aborted)} of {cfg.trials} trials dropped", file=sys.stderr)
        return EXIT_ABORT
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = _parser().parse_args(argv)
    try:
        if args.command == "validate":
            cfg = load(args.config)
            print(f"ok: {cfg.kind} on {cfg.scenario.id}, {len(cfg.algorithms)} algorithm(s), {cfg.trials} trial(s)")
            return EXIT_OK
        return _cmd_run(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
