"""Command line: ``mrmc run``, ``mrmc sweep``, ``mrmc verify``, ``mrmc schema``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Sequence

from .baselines import BASELINES
from .config import ConfigError, SystemConfig, config_schema, load_config
from .experiments import SWEEP_VARS, ExperimentSpec, parse_grid, parse_names, run_sweep


def _base_config(path: str | None) -> SystemConfig:
    return load_config(path) if path else SystemConfig()


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="YAML config file (defaults to the built-in scenario)")
    p.add_argument("--out", help="output CSV path; metadata goes next to it as .json")
    p.add_argument("--ell-max", type=int, default=None, help="outer iteration cap (overrides the config)")
    p.add_argument("--init", choices=("deterministic", "random"), default="deterministic")
    p.add_argument("--timing", action="store_true", help="record wall time per design (breaks byte determinism)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mrmc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="optimize one channel draw")
    _add_common(run)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--baselines", default="", help=f"comma-separated subset of {','.join(BASELINES)}")

    sweep = sub.add_parser("sweep", help="Monte Carlo sweep over one parameter")
    _add_common(sweep)
    sweep.add_argument("--sweep", choices=SWEEP_VARS, default="none")
    sweep.add_argument("--grid", default="0", help="values, e.g. --grid=-5,0,5,10 (dB for snr_r, cnr, sigma2_si)")
    sweep.add_argument("--trials", type=int, default=1)
    sweep.add_argument("--baselines", default="", help=f"comma-separated subset of {','.join(BASELINES)}")
    sweep.add_argument("--seed", type=int, default=0, help="master seed")
    sweep.add_argument("--workers", type=int, default=1)

    verify = sub.add_parser("verify", help="run the oracle suite")
    verify.add_argument("--seed", type=int, default=0)

    sub.add_parser("schema", help="print the config keys and defaults")
    return parser


def _print_summary(result, stream) -> None:
    for row in result.summary():
        print(f"{result.spec.sweep}={row['value']:g}  {row['design']:<18s} "
              f"I_CWSM={row['mean']:.4f} +/- {row['se']:.4f}  (n={row['n']}, failed={row['failed']})", file=stream)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "schema":
            print(config_schema())
            return 0
        if args.command == "verify":
            from .oracles import verify_all

            reports = verify_all(seed=args.seed)
            for r in reports:
                print(r.line())
            failed = sum(not r.passed for r in reports)
            print(f"{len(reports) - failed}/{len(reports)} checks passed")
            return 0 if failed == 0 else 1
        base = _base_config(args.config)
        if args.command == "run":
            spec = ExperimentSpec(sweep="none", grid=(0.0,), trials=1, baselines=parse_names(args.baselines),
                                  out=args.out, seed=args.seed, init=args.init, ell_max=args.ell_max,
                                  timing=args.timing)
        else:
            spec = ExperimentSpec(sweep=args.sweep, grid=parse_grid(args.grid), trials=args.trials,
                                  baselines=parse_names(args.baselines), out=args.out, seed=args.seed,
                                  init=args.init, ell_max=args.ell_max, timing=args.timing, workers=args.workers)
        result = run_sweep(spec, base)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"mrmc: error: {exc}", file=sys.stderr)
        return 2
    if spec.out is None:
        sys.stdout.write(result.csv_text())
    _print_summary(result, sys.stderr if spec.out is None else sys.stdout)
    return 0 if not any(r.failed for r in result.rows) else 1


if __name__ == "__main__":
    sys.exit(main())
