"""Command-line entry point: ``quasistatic-bench <command> --config FILE``."""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .bench import COMMANDS
from .config import load_config
from .errors import ConfigError, IntegrationError, SynthesisError

EXIT_OK, EXIT_CONFIG, EXIT_SYNTHESIS, EXIT_INTEGRATION = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, metavar="PATH", help="experiment file (key = value)")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides out_dir)")
    common.add_argument("--steps", type=int, metavar="N", help="RK4 steps (overrides steps)")
    common.add_argument("--seedless", action="store_true",
                        help="accepted for scripting; every run is deterministic regardless")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="quasistatic-bench",
                                     description="Protocol synthesis and finite-time driving benchmarks.")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("eos-scan", parents=[common], help="quasistatic equation of state over the process range")
    sub.add_parser("drive", parents=[common], help="trajectories for each protocol at fixed tau")
    sub.add_parser("sweep-tau", parents=[common], help="final excess quantity versus tau")
    sub.add_parser("transitions", parents=[common], help="per-mode excitation spectrum (ising)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if args.out:
            cfg = replace(cfg, out_dir=args.out)
        if args.steps is not None:
            cfg = replace(cfg, steps=args.steps).resolved()
        paths = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SynthesisError as exc:
        print(f"synthesis failure: {exc}", file=sys.stderr)
        return EXIT_SYNTHESIS
    except IntegrationError as exc:
        print(f"integration failure: {exc}", file=sys.stderr)
        return EXIT_INTEGRATION
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
