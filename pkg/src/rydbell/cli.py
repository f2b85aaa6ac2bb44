"""Command-line front end.

Usage: simulate <scenario> [--config path] [--seed u64] [--shots n]
       [--out dir] [--workers n] [--preset name]

Exit codes: 0 success, 1 configuration error, 2 runtime error. The default
output directory comes from $RYDBELL_OUTDIR, falling back to ./results.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config import SCENARIOS, build_config, load_config, with_overrides
from .errors import ConfigurationError, RydbellError
from .scenarios import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

OUTDIR_ENV = "RYDBELL_OUTDIR"


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="simulate",
        description="Run a named simulation scenario and write counts plus derived results.",
    )
    parser.add_argument("scenario", choices=SCENARIOS, help="scenario to run")
    parser.add_argument("--config", help="JSON experiment config; defaults apply when omitted")
    parser.add_argument("--preset", help="noise preset when no config file is given (ideal, paper-calibrated)")
    parser.add_argument("--seed", type=int, help="master seed override (unsigned 64-bit)")
    parser.add_argument("--shots", type=int, help="shots per point / settings pair override")
    parser.add_argument("--workers", type=int, help="parallel sampling workers")
    parser.add_argument(
        "--out",
        help=f"output directory (default ${OUTDIR_ENV} or ./results)",
    )
    return parser


def _summary_lines(scenario: str, derived: dict) -> list[str]:
    if scenario == "rabi-scan":
        return [f"pi time: {derived['pi_time_ns']:.3f} ns ({derived['target']})"]
    if scenario == "prep-verify":
        return [f"fringe visibility: {derived['visibility']:.4f} +- {derived['visibility_err']:.4f}"]
    if scenario == "entangle-scan":
        return [
            f"V1 = {derived['v1']:.4f} +- {derived['v1_err']:.4f}",
            f"V2 = {derived['v2']:.4f} +- {derived['v2_err']:.4f}",
            f"fidelity bound = {derived['fidelity_bound']:.4f} +- {derived['fidelity_bound_err']:.4f}",
        ]
    if scenario == "chsh":
        es = ", ".join(f"{e:+.4f}" for e in derived["e_values"])
        return [
            f"E values: {es}",
            f"S = {derived['s_value']:.4f} +- {derived['sigma_s']:.4f}"
            f" ({derived['violation_sigmas']:.2f} sigma above 2)",
        ]
    return [
        f"detection probability: {derived['detection_probability']:.5f}"
        f" (budget product {derived['expected_end_to_end']:.5f})"
    ]


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.config:
            if args.preset:
                raise ConfigurationError("--preset only applies when no --config is given")
            config = load_config(args.config)
            if config.scenario != args.scenario:
                raise ConfigurationError(
                    f"config file is for scenario {config.scenario!r}, not {args.scenario!r}"
                )
        else:
            raw = {"scenario": args.scenario}
            if args.preset:
                raw["preset"] = args.preset
            config = build_config(raw)
        config = with_overrides(
            config, shots=args.shots, master_seed=args.seed, workers=args.workers
        )
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    outdir = args.out or os.environ.get(OUTDIR_ENV) or "results"
    try:
        bundle = run_scenario(config)
        paths = bundle.write(outdir)
    except RydbellError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"runtime error writing output: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    for line in _summary_lines(config.scenario, bundle.derived):
        print(line)
    print(f"results: {paths['results']}")
    print(f"counts:  {paths['counts']}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
