"""Command-line front end for the study harness.

Subcommands ``space``, ``time``, ``conditioning`` and ``single`` run the
corresponding study and write a CSV. Exit code 0 on success; on failure
a single machine-readable ``error: {...}`` line goes to stderr and the
exit code is 2 for configuration problems, 1 otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, FsiError
from .harness import STUDIES, parse_config, run_study


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fsischur",
        description="Partitioned fluid-structure interaction studies via "
                    "an interface/pressure Schur complement solver.")
    sub = parser.add_subparsers(dest="study", required=True)
    for study in STUDIES:
        p = sub.add_parser(study, help=f"run the {study} study")
        p.add_argument("--config", type=Path, default=None,
                       help="flat key-value config file (defaults apply "
                            "when omitted)")
        p.add_argument("--out", type=Path, default=None,
                       help="output CSV path (default <study>.csv)")
        p.add_argument("--solver", choices=("cg", "pcg", "direct"),
                       default=None, help="override the Schur solver")
    return parser


def _fail(kind, message, code):
    sys.stderr.write("error: " + json.dumps(
        {"kind": kind, "message": message}) + "\n")
    return code


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        text = args.config.read_text() if args.config else ""
    except OSError as exc:
        return _fail("io", str(exc), 2)
    try:
        config = parse_config(text, study=args.study)
        if args.solver:
            config.solver = args.solver
        report = run_study(config)
    except ConfigError as exc:
        return _fail("config", str(exc), 2)
    except FsiError as exc:
        return _fail(type(exc).__name__, str(exc), 1)

    out = args.out or Path(config.out or f"{args.study}.csv")
    report.to_csv(out)
    elapsed = report.timings.get("elapsed", 0.0)
    print(f"{args.study}: {len(report.rows)} rows -> {out} "
          f"({elapsed:.1f}s)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
