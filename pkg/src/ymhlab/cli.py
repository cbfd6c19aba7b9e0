"""Command line entry point.

Subcommands: vortex | minimize | gamma | monotonicity | width |
flatnorm | info.  Global flags: --config PATH, --out DIR, --seed U64,
--threads N.  Exit codes: 0 success, 2 config error, 3 numeric failure,
4 acceptance violation under --strict.

Identical config and seed give bit-identical CSV outputs: all
randomness flows from the seed and reductions use numpy's deterministic
pairwise summation in a single process.
"""

from __future__ import annotations

import argparse
import json
import sys

from .experiments import (
    ConfigError,
    ExperimentConfig,
    cmd_flatnorm,
    cmd_gamma,
    cmd_info,
    cmd_minimize,
    cmd_monotonicity,
    cmd_vortex,
    cmd_width,
)
from .flow import NumericFailure

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ACCEPTANCE = 4

DRIVERS = {
    "vortex": cmd_vortex,
    "minimize": cmd_minimize,
    "gamma": cmd_gamma,
    "monotonicity": cmd_monotonicity,
    "width": cmd_width,
    "flatnorm": cmd_flatnorm,
}


def _strict_violations(command: str, result: dict) -> list[str]:
    """Config-driven acceptance checks evaluated under --strict."""
    bad = []
    if command == "vortex":
        for row in result.get("profiles", []):
            if abs(row["rel_defect"]) > 5e-3:
                bad.append(f"k={row['k']} quantization defect {row['rel_defect']:.2e}")
    if command == "minimize":
        for row in result.get("runs", []):
            if row["liminf_violations"]:
                bad.append(f"eps={row['eps']}: {row['liminf_violations']} "
                           "liminf ledger violations")
    if command == "monotonicity":
        for row in result.get("rows", []):
            if not row.get("bounded", True):
                bad.append(f"eps={row['eps']}: ratio above the config cap")
    if command == "width":
        if not result.get("ledger_ok", True):
            bad.append("width ledger inequality failed")
    if command == "gamma":
        for row in result.get("recovery", []):
            if not row["extract_equal"]:
                bad.append(f"eps={row['eps']}: extracted current differs from cycle")
    return bad


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ymhlab",
        description="Numerical laboratory for self-dual U(1) gauged "
                    "Ginzburg-Landau energies on flat tori",
    )
    parser.add_argument("command", choices=sorted(DRIVERS) + ["info"])
    parser.add_argument("--config", default=None, help="flat key = value file")
    parser.add_argument("--out", default="out", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="64-bit RNG seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="recorded for provenance; runs are single-process")
    parser.add_argument("--strict", action="store_true",
                        help="exit 4 when an acceptance check fails")
    args = parser.parse_args(argv)

    try:
        text = open(args.config).read() if args.config else ""
        cfg = ExperimentConfig.parse(text)
        if args.seed is not None:
            cfg.values["seed"] = str(args.seed)
        if args.threads is not None:
            cfg.values["threads"] = str(args.threads)
            cfg.get_int("threads")
        if args.command == "info":
            result = cmd_info(cfg)
            print(json.dumps(result, default=str, indent=2))
            return EXIT_OK
        result = DRIVERS[args.command](cfg, args.out)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericFailure as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC

    print(json.dumps(result, default=str, indent=2))
    if args.strict:
        bad = _strict_violations(args.command, result)
        if bad:
            for line in bad:
                print(f"acceptance violation: {line}", file=sys.stderr)
            return EXIT_ACCEPTANCE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
