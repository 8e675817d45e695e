"""Command line interface: run scenarios, print predictions, emit the gallery.

Verbs::

    torusdrift run <file> [--out DIR] [--jobs N]
    torusdrift predict <file>
    torusdrift gallery [--out PATH]

``run`` exits 0 exactly when every comparison lands within its scenario
tolerance.
"""

from __future__ import annotations

import argparse
import shutil
import sys
from importlib import resources
from pathlib import Path

from .errors import TorusDriftError
from .runner import format_report, predict_only, run
from .scenario import parse_scenarios


def _cmd_run(args) -> int:
    scenarios = parse_scenarios(args.file)
    report = run(scenarios, args.out, jobs=args.jobs)
    sys.stdout.write(format_report(report))
    if args.out is not None:
        sys.stdout.write(f"artifacts written to {args.out}\n")
    return 0 if report.all_pass else 1


def _cmd_predict(args) -> int:
    scenarios = parse_scenarios(args.file)
    rows = predict_only(scenarios)
    for row in rows:
        pred = (" ".join(repr(v) for v in row.predicted)
                if row.predicted is not None else "-")
        sys.stdout.write(f"{row.scenario_id}, {row.start_index}: "
                         f"{row.case_tag} | {pred}\n")
    return 0


def _cmd_gallery(args) -> int:
    target = Path(args.out)
    if target.is_dir():
        target = target / "gallery.toml"
    with resources.as_file(resources.files("torusdrift.data")
                           / "gallery.toml") as src:
        shutil.copyfile(src, target)
    sys.stdout.write(f"gallery scenario file written to {target}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="torusdrift",
        description="Simulate periodic torus flows and compare measured "
                    "drift against closed-form predictions.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run scenarios and write reports")
    p_run.add_argument("file", help="scenario file (TOML)")
    p_run.add_argument("--out", default=None, help="output directory for CSVs")
    p_run.add_argument("--jobs", type=int, default=1,
                       help="parallel worker processes")
    p_run.set_defaults(func=_cmd_run)

    p_pred = sub.add_parser("predict", help="print analytic predictions only")
    p_pred.add_argument("file", help="scenario file (TOML)")
    p_pred.set_defaults(func=_cmd_predict)

    p_gal = sub.add_parser("gallery", help="write the bundled scenario file")
    p_gal.add_argument("--out", default=".", help="target file or directory")
    p_gal.set_defaults(func=_cmd_gallery)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except TorusDriftError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
