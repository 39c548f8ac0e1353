"""Command-line interface for the experiment harness.

Exit codes: 0 on success, 1 for configuration errors, 2 when one or more
grid cells failed at runtime (remaining cells still ran and were written).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .harness import (
    ConfigError,
    ExperimentConfig,
    emit_csv,
    parse_config,
    run_experiment,
)

_DEFAULT_CONFIGS = {
    "regret": """\
kind: regret
regret:
  algorithms: [prae-r, prae-c, dprse]
  family: student_t
  arms: 5
  epsilons: [0.2, 0.5, 1.0]
  alphas: [0.05]
""",
    "concentration": """\
kind: concentration
concentration:
  estimator: raw
  sample_sizes: [1024, 4096, 16384, 65536]
  reps: 2000
""",
    "audit": """\
kind: audit
audit:
  trials: 200
""",
    "hard-instance": """\
kind: hard-instance
hard_instance:
  algorithms: [prae-r, dprse]
  gamma: 1.0
  arms: 5
""",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="prbandits",
        description="Private and robust bandit experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("regret", "regret curves on the linear-means instances"),
        ("concentration", "Monte-Carlo check of estimator error quantiles"),
        ("audit", "empirical truncated-mean sensitivity sweep"),
        ("hard-instance", "regret curves on the two-point worst case"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument("--config", type=Path, default=None, help="YAML config path")
        cmd.add_argument("--out", type=Path, default=None, help="output CSV path")
        cmd.add_argument("--seed", type=int, default=None, help="override base seed")
        cmd.add_argument(
            "--profile",
            choices=("desk", "paper"),
            default="paper",
            help="defaults for horizon/repeats when the config omits them",
        )
        cmd.add_argument(
            "--threads", type=int, default=1, help="worker threads for grid cells"
        )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.config is not None:
            text = Path(args.config).read_text(encoding="utf-8")
        else:
            text = _DEFAULT_CONFIGS[args.command]
        config = parse_config(text, profile=args.profile)
        if config.kind != args.command:
            raise ConfigError(
                f"config kind {config.kind!r} does not match subcommand "
                f"{args.command!r}"
            )
        if args.seed is not None:
            config = ExperimentConfig(
                kind=config.kind,
                section=config.section,
                base_seed=args.seed,
                out=config.out,
            )
        out_path = args.out or config.out or f"{args.command}.csv"
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
    except (OSError, ConfigError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1

    outcome = run_experiment(config, threads=args.threads)
    emit_csv(outcome.rows, out_path, row_type=outcome.row_type)
    print(f"wrote {len(outcome.rows)} rows to {out_path}")
    if outcome.failures:
        for cell, message in outcome.failures:
            print(f"cell failed: {cell}: {message}", file=sys.stderr)
        return 2
    return 0


def entrypoint() -> None:
    raise SystemExit(main())
