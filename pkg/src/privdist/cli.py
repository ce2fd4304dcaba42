"""Command-line harness entry point.

Exit codes: 0 on success, 2 on configuration errors, 3 on internal invariant
violations.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import (
    ConfigError,
    ExperimentConfig,
    InvariantError,
    load_config,
    run_experiment,
    sweep,
    write_csv,
    write_metadata,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privdist",
        description="Seeded Monte Carlo experiments for private distribution "
        "testing with advice.",
    )
    parser.add_argument("--task", choices=["identity", "closeness", "l2check", "coupling", "sensitivity"])
    parser.add_argument("--config", help="key=value config file with an [experiment] section")
    parser.add_argument("--scenario", choices=["null", "far", "advice-close", "custom"])
    parser.add_argument("--trials", type=int)
    parser.add_argument("--seed", type=int, help="master seed; per-trial streams are derived from it")
    parser.add_argument("--out", help="CSV output path (JSON metadata written alongside)")
    parser.add_argument("--sweep", help="FIELD=v1,v2,... run once per value of a numeric field")
    parser.add_argument("--threads", type=int, help="worker processes; 0 = auto, 1 = serial")
    parser.add_argument("--n", type=int)
    parser.add_argument("--eps", type=float)
    parser.add_argument("--alpha", type=float)
    parser.add_argument("--xi", type=float)
    parser.add_argument("--eta", type=float)
    return parser


def _config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    overrides = {
        "task": args.task,
        "scenario": args.scenario,
        "trials": args.trials,
        "master_seed": args.seed,
        "output_path": args.out,
        "threads": args.threads,
        "n": args.n,
        "eps": args.eps,
        "alpha": args.alpha,
        "xi": args.xi,
        "eta": args.eta,
    }
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if args.config:
        return load_config(args.config, overrides)
    if "task" not in overrides:
        raise ConfigError("task: required (pass --task or a config file)")
    config = ExperimentConfig(**{k: v for k, v in overrides.items()})
    config.validate()
    return config


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _config_from_args(args)
        if args.sweep:
            if "=" not in args.sweep:
                raise ConfigError("sweep: expected FIELD=v1,v2,...")
            axis, _, raw = args.sweep.partition("=")
            values = [v for v in raw.split(",") if v]
            if not values:
                raise ConfigError("sweep: no values given")
            rows = sweep(config, axis.strip(), values)
        else:
            rows = run_experiment(config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InvariantError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return 3

    out = config.output_path or "results.csv"
    write_csv(rows, out)
    write_metadata(config, rows, Path(out).with_suffix(Path(out).suffix + ".meta.json"))
    for row in rows:
        print(row.to_csv_line())
    return 0


if __name__ == "__main__":
    sys.exit(main())
