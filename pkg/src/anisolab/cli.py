"""Command line entry point ``anisolab``.

Exit codes: 0 success, 2 config error, 3 numerical failure, 4 a criteria
verdict failed while ``--gate`` was given.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

from .config import ConfigError, default_config, load_config
from .runner import RUN_SUBCOMMANDS, StageError, export_plot_data, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_GATE = 0, 2, 3, 4

log = logging.getLogger("anisolab")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anisolab", description="Transfer operators of hyperbolic torus maps.")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    for name in RUN_SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="TOML scenario file (defaults are used when omitted)")
        p.add_argument("--out", help="output directory for report.json and tables")
        p.add_argument("--seed", type=int)
        p.add_argument("--threads", type=int)
        p.add_argument("--deterministic", action="store_true", default=None)
        p.add_argument("--gate", action="store_true", help="exit with status 4 when a verdict fails")
        p.add_argument("--plot", action="append", default=[], metavar="TABLE",
                       help="also write TABLE.dat plot columns into the output directory")
        p.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = load_config(args.config) if args.config else default_config()
    except ConfigError as exc:
        where = f" (line {exc.line}, column {exc.column})" if exc.line is not None else ""
        print(f"config error: {exc}{where}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = args.out or cfg.output.dir
    try:
        rep = run_scenario(cfg, args.subcommand, out, args.seed, args.threads, args.deterministic)
        for table in args.plot:
            export_plot_data(rep, table, os.path.join(out, f"{table}.dat"))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KeyError as exc:
        print(f"export error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StageError, ArithmeticError, MemoryError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    summary = {"subcommand": rep.subcommand, "report_hash": rep.report_hash, "verdicts": rep.verdicts,
               "out": os.path.abspath(out)}
    print(json.dumps(summary, sort_keys=True))
    for stage, sec in rep.timings.items():
        log.info("%s: %.2fs", stage, sec)
    if args.gate and not rep.passed:
        return EXIT_GATE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
