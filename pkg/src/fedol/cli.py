"""Command line entry point: ``fedol run <config> [--seed N] [--out DIR] [--strategies LIST]``."""

import argparse
import logging
import sys
from pathlib import Path

from fedol import harness
from fedol.config import STRATEGIES, load_config, resolved_text
from fedol.errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def build_parser():
    parser = argparse.ArgumentParser(prog="fedol", description="One-shot federated distillation simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config", type=Path)
    run.add_argument("--seed", type=int, default=None, help="override the config's seed list")
    run.add_argument("--out", type=Path, default=Path("."), help="output directory")
    run.add_argument("--strategies", default=None,
                     help=f"comma-separated subset of {','.join(STRATEGIES)}")
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def cmd_run(args):
    try:
        cfg = load_config(args.config)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.seeds = [args.seed]
    if args.strategies:
        cfg.strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
        unknown = [s for s in cfg.strategies if s not in STRATEGIES]
        if unknown:
            print(f"error: unknown strategies {unknown}", file=sys.stderr)
            return EXIT_CONFIG

    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "config.resolved").write_text(resolved_text(cfg))
    (args.out / "cost.csv").write_text(harness.cost_csv(cfg, cfg.strategies))
    try:
        result = harness.run_experiment(cfg)
    except Exception as exc:
        logging.getLogger("fedol").exception("experiment aborted")
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    (args.out / "metrics.csv").write_text(harness.metrics_csv(result.rows))
    if result.failures:
        for partition, seed, strategy, msg in result.failures:
            print(f"failed: {strategy} [{partition}, seed {seed}]: {msg}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
