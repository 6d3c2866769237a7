#!/usr/bin/env python3
"""
gpe command-line interface

  gpe solve <config> [--seed S] [--paths 1-9] [--workers W] [--sigma X] [--kind K] [--out DIR]
  gpe verify <report.json | run dir>
  gpe export <report.json | run dir> --path K

Exit codes: 0 ok (path failures are flagged in the report), 1 all paths failed
or a hard verification check failed, 2 configuration or I/O error.
"""
import sys
import logging
import argparse
import textwrap
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from gpehom.core.config import ConfigError, GpehomSettings, load_run_config
from gpehom.core.engine import EXIT_CONFIG, GPEHomotopyEngine

PROG = "gpe"


def echo(msg: str):
    print(msg, flush=True)


def setup_logging(settings: GpehomSettings) -> None:
    level = getattr(logging, settings.log_level, logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


@dataclass(frozen=True)
class CommandInfo:
    """Metadata for a CLI command."""
    name: str
    handler: Callable[[List[str]], int]
    summary: str
    aliases: Tuple[str, ...] = ()

    def matches(self, candidate: str) -> bool:
        return candidate == self.name or candidate in self.aliases


def _engine() -> GPEHomotopyEngine:
    settings = GpehomSettings.from_env()
    setup_logging(settings)
    return GPEHomotopyEngine(settings=settings)


def cmd_solve(argv: List[str]) -> int:
    """Trace the configured paths and write report.json, eigenvector and path-log CSVs.

    Command-line options override the corresponding config keys.
    """
    parser = argparse.ArgumentParser(prog=f"{PROG} solve", description=cmd_solve.__doc__)
    parser.add_argument("config", help="flat key = value run configuration")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--paths", help="1-based path indices, e.g. 1-9 or 1,3,5")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--kind", choices=("diag", "blocktridiag", "pentadiag"))
    parser.add_argument("--out", help="output directory")
    args = parser.parse_args(argv)

    engine = _engine()
    config_path = Path(args.config)
    overrides = {"seed": args.seed, "paths": args.paths, "workers": args.workers,
                 "sigma": args.sigma, "kind": args.kind, "out": args.out}
    try:
        cfg = load_run_config(config_path, overrides)
    except ConfigError as e:
        echo(f"error: {e}")
        return EXIT_CONFIG

    result = engine.solve(cfg, base_dir=config_path.resolve().parent)
    if result.data is None:
        echo(f"error: {result.error}")
        return result.exit_code
    report = result.data
    echo(f"{'path':>5} {'status':<20} {'lambda(0)':>14} {'lambda(1)':>18} {'residual':>10} {'steps':>6}  flags")
    for p in report.paths:
        lam = f"{p.lam:.10g}" if p.lam is not None else "-"
        res = f"{p.residual:.2e}" if p.residual is not None else "-"
        echo(f"{p.index:>5} {p.status:<20} {p.initial_lambda:>14.8g} {lam:>18} {res:>10} {p.steps:>6}  {','.join(p.flags)}")
    for c in report.checks:
        state = "n/a" if not c.applicable else ("pass" if c.passed else "FAIL")
        echo(f"  check {c.name:<18} {state:<5} {c.message}")
    echo(f"results written to {result.meta['out_dir']}")
    return result.exit_code


def cmd_verify(argv: List[str]) -> int:
    """Recompute residuals and re-run the SCF, antisymmetry, bound and ordering checks of a finished run."""
    parser = argparse.ArgumentParser(prog=f"{PROG} verify", description=cmd_verify.__doc__)
    parser.add_argument("report", help="report.json or its run directory")
    args = parser.parse_args(argv)

    result = _engine().verify(args.report)
    if result.data is None:
        echo(f"error: {result.error}")
        return result.exit_code
    for c in result.data:
        state = "n/a" if not c.applicable else ("pass" if c.passed else "FAIL")
        kind = "hard" if c.hard else "soft"
        echo(f"{c.name:<20} {kind:<5} {state:<5} {c.message}")
    echo("verification passed" if result.success else f"verification failed: {result.error}")
    return result.exit_code


def cmd_export(argv: List[str]) -> int:
    """Write plot-ready data for one path, boundary zeros included."""
    parser = argparse.ArgumentParser(prog=f"{PROG} export", description=cmd_export.__doc__)
    parser.add_argument("report", help="report.json or its run directory")
    parser.add_argument("--path", type=int, required=True, help="1-based path index")
    args = parser.parse_args(argv)

    result = _engine().export(args.report, args.path)
    if not result:
        echo(f"error: {result.error}")
        return result.exit_code
    echo(f"wrote {result.meta['rows']} rows to {result.data}")
    return result.exit_code


COMMAND_DEFINITIONS: Tuple[CommandInfo, ...] = (
    CommandInfo("solve", cmd_solve, "Trace homotopy paths for a config file"),
    CommandInfo("verify", cmd_verify, "Re-verify a finished run from its files"),
    CommandInfo("export", cmd_export, "Export plot data for one path", aliases=("export-plot",)),
)

COMMAND_LOOKUP: Dict[str, CommandInfo] = {}
for info in COMMAND_DEFINITIONS:
    COMMAND_LOOKUP[info.name] = info
    for alias in info.aliases:
        COMMAND_LOOKUP[alias] = info


def print_usage() -> None:
    echo(f"Usage: {PROG} <command> [options]")
    echo("")
    for info in COMMAND_DEFINITIONS:
        names = ", ".join([info.name, *info.aliases])
        echo(f"  {names:<22} {info.summary}")
    echo("")
    echo(f"Use '{PROG} help <command>' or '{PROG} <command> --help' for details.")


def print_command_help(name: str) -> int:
    info = COMMAND_LOOKUP.get(name)
    if not info:
        echo(f"Unknown command: {name}")
        return EXIT_CONFIG
    echo(f"Command: {', '.join([info.name, *info.aliases])}")
    echo(f"Summary: {info.summary}")
    details = textwrap.dedent(info.handler.__doc__ or "").strip()
    if details:
        echo("")
        echo(details)
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv:
        print_usage()
        return EXIT_CONFIG

    cmd, rest = argv[0], argv[1:]
    if cmd in ("help", "-h", "--help"):
        if not rest:
            print_usage()
            return 0
        return print_command_help(rest[0])

    info = COMMAND_LOOKUP.get(cmd)
    if not info:
        echo(f"Unknown command: {cmd}")
        echo(f"Use '{PROG} help' to view available commands.")
        return EXIT_CONFIG
    try:
        return info.handler(rest)
    except SystemExit as e:  # argparse usage errors
        return e.code if isinstance(e.code, int) else EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
