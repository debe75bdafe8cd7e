"""Command-line entry point: ``python -m hybriddefense <stage> --config PATH``."""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys

from .config import PipelineConfig, parse_config, validate
from .errors import StageError, ValidationError
from .pipeline import run_stage

COMMANDS = ["prepare", "train-cnn", "fit-nnmf", "train-classifier", "train-denoiser",
            "attack", "evaluate", "report", "all"]


def build_parser():
    p = argparse.ArgumentParser(prog="hybriddefense",
                                description="Hybrid NNMF+CNN digit classifier with "
                                            "feature-space diffusion defense.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config file (defaults when omitted)")
    p.add_argument("--out", help="output directory (overrides config output_dir)")
    p.add_argument("--seed", type=int, help="overrides the config seed")
    p.add_argument("-q", "--quiet", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        cfg = parse_config(args.config) if args.config else PipelineConfig()
        if args.seed is not None:
            cfg = validate(dataclasses.replace(cfg, seed=args.seed))
    except ValidationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    out = args.out or cfg.output_dir
    try:
        result = run_stage(args.command, cfg, out)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1 if isinstance(exc.cause, ValidationError) else 2
    if args.command in ("evaluate", "all"):
        from .pipeline import format_results
        print(format_results(result), end="")
    return 0


if __name__ == "__main__":
    sys.exit(main())
