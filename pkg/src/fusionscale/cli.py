"""Command-line entry point: ``simulate``, ``zeta`` and ``bounds``.

Exit codes: 0 success, 2 configuration error, 3 missing zeta data.
"""
from __future__ import annotations

import argparse
import sys

from .experiment import (
    ConfigError,
    ExperimentConfig,
    MissingZetaError,
    apply_overrides,
    load_config,
    run_bounds,
    run_sweep,
    run_zeta,
)
from .scaling import format_zeta

EXIT_OK, EXIT_CONFIG, EXIT_MISSING = 0, 2, 3

# config keys that can be overridden from the command line
_OVERRIDE_FLAGS = ("name", "policies", "dependency", "k", "delta", "placement", "nu", "n",
                   "lambda", "runs", "seed", "network", "proc-mode", "u")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(message)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="flat key = value config file")
    p.add_argument("--out", metavar="DIR", help="output directory (config key 'output')")
    for key in _OVERRIDE_FLAGS:
        p.add_argument(f"--{key}", dest=f"ov_{key.replace('-', '_')}", metavar="VALUE",
                       help=f"override config key '{key}'")
    p.add_argument("--no-plots", action="store_true", help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fusionscale", description="Energy scaling of data-fusion policies "
                     "over random sensor deployments.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sim = sub.add_parser("simulate", help="run a policy sweep and write CSV files and figures")
    _add_config_flags(sim)

    z = sub.add_parser("zeta", help="estimate limit constants and append them to a zeta table")
    z.add_argument("--kind", choices=("mst", "knng", "disc"), required=True)
    z.add_argument("--k", type=int, default=1, help="neighbors for knng")
    z.add_argument("--delta", type=float, default=0.0, help="radius for disc")
    z.add_argument("--nu", default="2", help="comma separated exponents")
    z.add_argument("--reps", type=int, default=1000)
    z.add_argument("--seed", type=int, default=0)
    z.add_argument("--intensity", type=float, default=1.0)
    z.add_argument("--window", type=float, default=50.0)
    z.add_argument("--table", default="zeta_table.txt", metavar="PATH")

    b = sub.add_parser("bounds", help="asymptotic bounds next to finite-n measurements")
    _add_config_flags(b)
    b.add_argument("--zeta-table", required=True, metavar="PATH")
    b.add_argument("--summary", metavar="PATH",
                   help="reuse an existing summary CSV instead of running a sweep")
    return parser


def _config_from(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = {key: getattr(args, f"ov_{key.replace('-', '_')}") for key in _OVERRIDE_FLAGS}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.out is not None:
        overrides["output"] = args.out
    return apply_overrides(cfg, overrides).validate()


def _cmd_simulate(args) -> int:
    cfg = _config_from(args)
    written = run_sweep(cfg, plots=False if args.no_plots else None)
    for label, path in written.items():
        print(f"{label}\t{path}")
    return EXIT_OK


def _cmd_zeta(args) -> int:
    try:
        nus = [float(v) for v in args.nu.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad --nu list {args.nu!r}") from None
    param = {"mst": 0.0, "knng": args.k, "disc": args.delta}[args.kind]
    try:
        ests = run_zeta(args.kind, nus, args.reps, args.seed, param, args.intensity,
                        args.window, table=args.table)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for z in ests:
        print(format_zeta(z))
    return EXIT_OK


def _cmd_bounds(args) -> int:
    cfg = _config_from(args)
    try:
        written = run_bounds(cfg, args.zeta_table, plots=False if args.no_plots else None,
                             summary=args.summary)
    except FileNotFoundError as exc:
        raise MissingZetaError(f"cannot read {exc.filename}") from exc
    for label, path in written.items():
        print(f"{label}\t{path}")
    return EXIT_OK


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        handler = {"simulate": _cmd_simulate, "zeta": _cmd_zeta, "bounds": _cmd_bounds}
        return handler[args.command](args)
    except ConfigError as exc:
        print(f"fusionscale: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingZetaError as exc:
        print(f"fusionscale: missing data: {exc}", file=sys.stderr)
        return EXIT_MISSING


if __name__ == "__main__":
    sys.exit(main())
