"""Command-line front end.

    atomlaser simulate --config run.config --out results/
    atomlaser sweep --config sweep.config --workers 4
    atomlaser optimize-cut --config opt.config
    atomlaser kappa-scan --config scan.config
    atomlaser sources [--catalog table.csv]
    atomlaser validate --config run.config --seed 7

Exit codes: 0 success, 1 validation or check failure, 2 solver failure,
64 usage error.  Worker count falls back to the QKT_WORKERS environment
variable, then to 1.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import ConfigError, apply_overrides, parse_config
from .integrator import StiffnessError
from .runner import SolverFailure, run

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_SOLVER = 2
EXIT_USAGE = 64

SUBCOMMANDS = ("simulate", "sweep", "optimize-cut", "kappa-scan",
               "sources", "validate")


class _Parser(argparse.ArgumentParser):
    """argparse with BSD-style usage exit code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> _Parser:
    parser = _Parser(prog="atomlaser",
                     description="Kinetic model of a collisionally pumped "
                                 "continuous atom laser.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run {'an' if name[0] in 'ao' else 'a'} {name} job")
        p.add_argument("--config", metavar="PATH",
                       required=name != "sources",
                       help="run configuration file")
        p.add_argument("--out", metavar="DIR",
                       help="output directory (default: from config)")
        p.add_argument("--workers", type=int, metavar="N",
                       help="parallel solver processes "
                            "(default: QKT_WORKERS or 1)")
        p.add_argument("--seed", type=int, metavar="N",
                       help="seed for randomized validation checks")
        p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE",
                       help="config override, e.g. pump.gamma_per_s=0.6 "
                            "(repeatable)")
        if name == "sources":
            p.add_argument("--catalog", metavar="PATH",
                           help="source catalog (default: packaged table)")
    return parser


def _resolve_workers(args) -> int:
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError(["--workers must be at least 1"])
        return args.workers
    env = os.environ.get("QKT_WORKERS", "").strip()
    if env:
        try:
            workers = int(env)
        except ValueError:
            raise ConfigError(
                [f"QKT_WORKERS: expected an integer, got {env!r}"]) from None
        if workers < 1:
            raise ConfigError(["QKT_WORKERS must be at least 1"])
        return workers
    return 1


_SOURCES_DEFAULT = """
[pump]
Phi_per_s = 1.0
T_nK = 1.0
gamma_per_s = 0.0
eps_cut_kBT = 1.0

[experiment]
mode = "sources"
"""


def _load_config(args) -> str:
    if args.config is None:
        return _SOURCES_DEFAULT
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config: {exc}"]) from exc


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        workers = _resolve_workers(args)
        text = _load_config(args)
        overrides = list(args.override)
        mode = args.command
        overrides.append(f'experiment.mode="{mode}"')
        if mode == "sources" and getattr(args, "catalog", None):
            overrides.append(f'experiment.catalog="{args.catalog}"')
        cfg = parse_config(apply_overrides(text, overrides))
    except ConfigError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID

    try:
        result = run(cfg, workers=workers, seed=args.seed,
                     out_dir=args.out)
    except (SolverFailure, StiffnessError) as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    summary = result.summary
    if cfg.mode == "validate":
        failed = [k for k, ok in summary["checks"].items() if not ok]
        for name in failed:
            print(f"check failed: {name}", file=sys.stderr)
        print(f"checks: {len(summary['checks']) - len(failed)}"
              f"/{len(summary['checks'])} passed "
              f"-> {result.out_dir / 'checks.tsv'}")
        return EXIT_OK if not failed else EXIT_INVALID
    print(f"{cfg.mode}: results in {result.out_dir}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
