"""Command line entry point.

    admissibility-lab run --config exp.json [--out DIR] [--workers K]
    admissibility-lab preset NAME [--out DIR] [--seed K] [--reps N] [--workers K]
    admissibility-lab presets

Exit status: 0 success, 2 invalid configuration (nothing written),
3 numerical failure (non-positive-definite covariance and the like).
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import load_config
from .errors import ConfigError, ConstraintViolationError, NumericalError
from .experiments import run_experiment, write_report
from .presets import get_preset, preset_names

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="admissibility-lab", description="Risk and admissibility experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", required=True, help="path to the JSON configuration")
    run.add_argument("--out", help="output directory (overrides output_dir)")
    run.add_argument("--workers", type=int, default=1, help="worker threads (results do not depend on it)")

    pre = sub.add_parser("preset", help="run a built-in experiment")
    pre.add_argument("name", help="preset name; see 'admissibility-lab presets'")
    pre.add_argument("--out", help="output directory")
    pre.add_argument("--seed", type=int)
    pre.add_argument("--reps", type=int, help="replications")
    pre.add_argument("--workers", type=int, default=1)

    sub.add_parser("presets", help="list built-in experiments")
    return p


def _error(kind: str, msg: str) -> None:
    print(f"admissibility-lab: {kind}: {msg}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)

    if args.command == "presets":
        for name in preset_names():
            print(name)
        return EXIT_OK

    try:
        if args.command == "run":
            try:
                with open(args.config, encoding="utf-8") as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigError(exc.strerror or str(exc), args.config) from exc
            cfg = load_config(text)
        else:
            if args.name not in preset_names():
                raise ConfigError(f"unknown preset; choose from {', '.join(preset_names())}", "preset")
            cfg = get_preset(args.name, seed=args.seed, replications=args.reps)
        out_dir = args.out or cfg.output_dir
        report = run_experiment(cfg, workers=args.workers)
    except ConfigError as exc:
        _error("invalid configuration", str(exc))
        return EXIT_CONFIG
    except (NumericalError, ConstraintViolationError) as exc:
        _error("numerical failure", str(exc))
        return EXIT_NUMERICAL

    for path in write_report(report, out_dir):
        print(path)
    if report.summary:
        print(json.dumps(report.to_json()["summary"], indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
