"""Command line entry point: ``rapid run|eval|sweep``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, env_spec_from_string, load_experiment, SWEEP_PARAMS
from .harness import evaluate, run_experiment, sweep


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rapid")
    parser.add_argument("-q", "--quiet", action="store_true", help="only warnings and errors")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a multi-seed experiment from a JSON config")
    p_run.add_argument("config")

    p_eval = sub.add_parser("eval", help="greedy evaluation of a checkpoint")
    p_eval.add_argument("checkpoint")
    p_eval.add_argument("env", help="e.g. chain-8, multiroom-n2-s4, keycorridor-s3-r2, pointmass")
    p_eval.add_argument("--episodes", type=int, default=20)
    p_eval.add_argument("--seed", type=int, default=0)

    p_sweep = sub.add_parser("sweep", help="run a config once per hyperparameter value")
    p_sweep.add_argument("config")
    p_sweep.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    p_sweep.add_argument("--values", required=True, help="comma-separated values")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "run":
            summary = run_experiment(load_experiment(args.config))
            print(f"run dir: {summary['run_dir']}")
            print(f"mean max return: {summary['mean_max']:.4f} +/- {summary['std_max']:.4f}")
        elif args.command == "eval":
            spec = env_spec_from_string(args.env)
            mean_return, success = evaluate(args.checkpoint, spec, args.episodes, args.seed)
            print(f"mean return: {mean_return:.4f}  success rate: {success:.3f}")
        elif args.command == "sweep":
            values = [float(v) for v in args.values.split(",") if v]
            if not values:
                raise ConfigError("--values must name at least one value")
            for summary in sweep(load_experiment(args.config), args.param, values):
                print(
                    f"{summary['name']}: mean max return "
                    f"{summary['mean_max']:.4f} +/- {summary['std_max']:.4f}"
                )
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # mid-run failures keep partial logs on disk
        logging.getLogger(__name__).error("run failed: %s", exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
