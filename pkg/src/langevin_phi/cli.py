"""Command-line entry point: ``langevin-phi run --config cfg.json``."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import PreconditionError, RGOError
from .experiments import ConfigError, ExperimentConfig, run

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_PRECONDITION = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="langevin-phi", description="Langevin sampler mixing experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="run one experiment from a JSON config")
    run_p.add_argument("--config", required=True, help="path to the JSON config")
    run_p.add_argument("--seed", type=int, default=None, help="override the config seed")
    run_p.add_argument("--output", default=None, help="override the CSV output path")
    run_p.add_argument("--quiet", action="store_true", help="suppress the summary line")
    return parser


def _load_config(args) -> ExperimentConfig:
    with open(args.config, encoding="utf-8") as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {args.config}: {exc}") from exc
    if isinstance(raw, dict):
        if args.seed is not None:
            raw["seed"] = args.seed
        if args.output is not None:
            raw["output_path"] = args.output
    return ExperimentConfig.from_dict(raw)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; keep --help at 0
        return int(exc.code or 0)
    try:
        cfg = _load_config(args)
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    try:
        result, csv_path, side = run(cfg)
    except (PreconditionError, RGOError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    if not args.quiet:
        print(f"{cfg.experiment}: {len(result.rows)} rows -> {csv_path} (+ {side.name})")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
