"""Command-line entry point: ``gapsoliton run|sweep|analyze``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from gapsoliton import __version__
from gapsoliton.analysis import AnalysisError
from gapsoliton.config import parse_config
from gapsoliton.engine import DivergedError
from gapsoliton.model import ConfigError
from gapsoliton.pipeline import cmd_analyze, cmd_run, cmd_sweep, parse_axis
from gapsoliton.records import IntegrityError

log = logging.getLogger("gapsoliton")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2


def _common(top: bool) -> argparse.ArgumentParser:
    # Sub-commands must not reset options given before the command name.
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1 if top else argparse.SUPPRESS, metavar="N",
                        help="worker processes for sweeps (default 1)")
    common.add_argument("--quiet", action="store_true", default=False if top else argparse.SUPPRESS,
                        help="only report errors")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common(top=False)
    p = argparse.ArgumentParser(prog="gapsoliton", parents=[_common(top=True)],
                                description="Maxwell-Bloch FDTD runs in layered two-level media.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", parents=[common], help="simulate one configuration")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: output_dir from the config)")

    s = sub.add_parser("sweep", parents=[common], help="run a one- or two-axis parameter sweep")
    s.add_argument("config")
    s.add_argument("--axis", required=True, help="field=v1,v2,... e.g. medium.d=0.1,0.2")
    s.add_argument("--axis2", help="second axis, same syntax")
    s.add_argument("--out", help="sweep directory (default: output_dir from the config)")

    a = sub.add_parser("analyze", parents=[common], help="re-run analyses on a stored run")
    a.add_argument("run_dir")
    a.add_argument("--spec", required=True, help="JSON file with a list of analyses")
    return p


def _summary(results) -> str:
    return json.dumps(results, indent=2)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            cfg = parse_config(args.config)
            out, results = cmd_run(cfg, args.out)
            if not args.quiet:
                print(f"wrote {out}")
                print(_summary(results))
        elif args.command == "sweep":
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            axes = [parse_axis(args.axis)]
            if args.axis2:
                axes.append(parse_axis(args.axis2))
            with open(args.config, encoding="utf-8") as fh:
                try:
                    template = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise ConfigError(f"{args.config}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
            table = cmd_sweep(template, axes, args.out, threads=args.threads)
            if not args.quiet:
                print(f"wrote {table}")
        else:
            results = cmd_analyze(args.run_dir, args.spec)
            if not args.quiet:
                print(_summary(results))
    except (ConfigError, AnalysisError, IntegrityError, DivergedError, FileNotFoundError) as exc:
        print(f"gapsoliton: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
