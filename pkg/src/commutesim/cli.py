"""Command line front end.

Subcommands: ``simulate`` runs a scenario and writes its CSV bundle,
``equilibrium`` solves only the steady state, ``validate`` runs the
load-time checks and exits.  Exit codes: 0 success, 2 configuration
error, 3 numerical error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigurationError, NumericalError
from .scenario import compute_equilibrium, load_config, run_scenario


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="commutesim",
        description="Simulator for the return-to-home commuting model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario and export CSV data")
    sim.add_argument("config", help="path to a scenario config file")
    sim.add_argument("--out", help="output directory (overrides the config)")
    sim.add_argument("--seed", type=int, help="home-placement seed override")
    sim.add_argument("--dt", type=float, help="time step override (day)")
    sim.add_argument("--t-end", type=float, dest="t_end", help="end time override (day)")

    eq = sub.add_parser("equilibrium", help="compute the steady state only")
    eq.add_argument("config", help="path to a scenario config file")
    eq.add_argument("--out", help="output directory (overrides the config)")
    eq.add_argument("--seed", type=int, help="home-placement seed override")

    val = sub.add_parser("validate", help="check a scenario config and exit")
    val.add_argument("config", help="path to a scenario config file")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            load_config(args.config)
            print(f"{args.config}: ok")
            return 0
        overrides = {"out": args.out, "seed": args.seed}
        if args.command == "simulate":
            overrides["dt"] = args.dt
            overrides["t_end"] = args.t_end
        config = load_config(args.config, overrides=overrides)
        if args.command == "simulate":
            report = run_scenario(config)
            print(f"wrote {len(report.files)} files to {report.out_dir} "
                  f"(conservation drift {report.max_conservation_drift:.3e}, "
                  f"{report.runtime_seconds:.1f}s)")
        else:
            report = compute_equilibrium(config)
            print(f"wrote {len(report.files)} files to {report.out_dir}")
        return 0
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
