"""Command-line entry point: ``togl <experiment> --config cfg.json --out dir``.

Exit codes: 0 success, 2 bad config, 3 bad data, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .data import load_csv
from .errors import ConfigError, DataError, NumericalError
from .experiments import KINDS, RUNNERS, ExperimentConfig, default_workers, fit_one

EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="togl", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", type=Path, help="JSON experiment config")
        p.add_argument("--out", type=Path, default=Path("results") / kind,
                       help="output directory (default: results/<experiment>)")
        p.add_argument("--workers", type=int, default=None,
                       help="parallel trials (default: $GREEDY_DICT_WORKERS or 1)")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        if kind == "fit":
            p.add_argument("--data", type=Path, required=True, help="CSV file with header x,y")
    return parser


def _load_config(args) -> ExperimentConfig:
    if args.config is not None:
        cfg = ExperimentConfig.from_json(args.config, args.command)
    else:
        cfg = ExperimentConfig.defaults(args.command)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    elif "GREEDY_DICT_WORKERS" in os.environ:
        cfg.workers = default_workers()
    return cfg.validate()


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        if args.command == "fit":
            z = load_csv(args.data)
            model, _, summary = fit_one(cfg, z)
            args.out.mkdir(parents=True, exist_ok=True)
            path = args.out / "estimator.json"
            path.write_text(json.dumps(model.to_dict(), indent=2) + "\n")
            for key, val in summary.items():
                print(f"{key}: {val}")
            print(f"wrote {path}")
            return 0
        report = RUNNERS[args.command](cfg)
        for path in report.write(args.out):
            print(f"wrote {path}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
