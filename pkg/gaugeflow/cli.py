import argparse
import json
import logging
import sys
from dataclasses import replace

from gaugeflow import __version__
from gaugeflow.config import RunConfig
from gaugeflow.errors import ConfigError, GaugeflowError
from gaugeflow.report import emit_report
from gaugeflow.suites import run_suites

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_ERROR, EXIT_FAILED = 0, 1, 2


def parse_args(argv=None) -> argparse.Namespace:
    parser = argparse.ArgumentParser(prog="gaugeflow", description="Run gauge-flow descent experiments from a JSON config.")
    parser.add_argument("--config", required=True, help="path to the run config JSON")
    parser.add_argument("--out", default=None, help="output directory (overrides the config's `out`)")
    parser.add_argument("--seed-override", type=int, default=None, help="replace the config's base seed")
    parser.add_argument("--version", action="version", version=f"gaugeflow {__version__}")
    return parser.parse_args(argv)


def load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_json(args.config)
    if args.out is not None:
        config = replace(config, out=args.out)
    if args.seed_override is not None:
        config = replace(config, seed=args.seed_override)
    return config


def run(args: argparse.Namespace) -> int:
    try:
        config = load_config(args)
    except (ConfigError, OSError, json.JSONDecodeError) as e:
        print(f"[error] {e}", file=sys.stderr)
        return EXIT_ERROR
    logging.basicConfig(level=config.log_level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")
    try:
        results = run_suites(config)
        emit_report(results, config, __version__)
    except (GaugeflowError, OSError) as e:
        print(f"[error] {e}", file=sys.stderr)
        return EXIT_ERROR
    logger.info("wrote %d suite(s) to %s", len(results), config.out)
    failed = [res.name for res in results if not res.passed]
    if failed:
        logger.warning("failed suites: %s", ", ".join(failed))
    for res in results:
        print(f"[{res.name}] {'PASS' if res.passed else 'FAIL'} ({sum(res.checks.values())}/{len(res.checks)} checks)")
    if failed:
        return EXIT_FAILED
    return EXIT_OK


def main(argv=None) -> int:
    return run(parse_args(argv))


if __name__ == "__main__":
    sys.exit(main())
