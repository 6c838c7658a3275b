# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

import argparse
import sys
from pathlib import Path
from typing import Sequence, get_args

import numpy as np
from loguru import logger
from pydantic import ValidationError

from cclb.core.exception import ConfigError, InfeasibleError, SolverError
from cclb.harness.config import PRESETS, build_decision_set, load_config, load_preset, with_overrides
from cclb.harness.plots import emit_plots
from cclb.harness.replication import replicate
from cclb.harness.runner import CACHE_DIR, cached_oracle, run_experiment
from cclb.harness.schema import Algorithm, ExperimentConfig, OracleReport, SupportPoint
from cclb.settings import RuntimeSettings
from cclb.util import pydantic_to_yaml

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cclb", description="Safe linear bandits over unions of convex sets."
    )
    commands = parser.add_subparsers(dest="command", required=True)

    helps = {
        "run": "Play one seeded run and write ledger.csv, trajectory.csv and summary.json.",
        "replicate": "Play the configured number of seeded runs and aggregate regret curves.",
        "plot": "Render SVG figures from the artifacts of a run or replicate directory.",
        "oracle": "Print the omniscient policy of the configured problem as YAML.",
    }
    for name, text in helps.items():
        sub = commands.add_parser(name, help=text, description=text)
        source = sub.add_mutually_exclusive_group(required=True)
        source.add_argument("--config", type=Path, help="Path to an experiment JSON file.")
        source.add_argument("--preset", choices=PRESETS, help="Use a shipped experiment preset.")
        sub.add_argument("--out", type=Path, default=None, help="Override the output directory.")
        sub.add_argument("--seed", type=int, default=None, help="Override the master seed.")
        sub.add_argument(
            "--algorithm", choices=get_args(Algorithm), default=None, help="Override the algorithm."
        )
    return parser


def _load(args: argparse.Namespace) -> ExperimentConfig:
    config = load_config(args.config) if args.config is not None else load_preset(args.preset)
    return with_overrides(config, output_dir=args.out, seed=args.seed, algorithm=args.algorithm)


def oracle_report(config: ExperimentConfig, settings: RuntimeSettings) -> OracleReport:
    decision_set = build_decision_set(config)
    cache_dir = Path(config.output_dir) / CACHE_DIR if settings.cache_oracle else None
    policy = cached_oracle(config, decision_set, cache_dir)
    return OracleReport(
        name=config.name,
        optimal_value=float(np.asarray(config.theta_star) @ policy.mean),
        mean=policy.mean.tolist(),
        costs=(np.asarray(config.gamma_star) @ policy.mean).tolist(),
        tau=config.tau,
        support=[SupportPoint(point=p.tolist(), weight=w) for p, w in policy.support],
    )


def dispatch(args: argparse.Namespace, settings: RuntimeSettings) -> None:
    config = _load(args)
    match args.command:
        case "run":
            artifacts = run_experiment(config, settings=settings)
            print(pydantic_to_yaml(artifacts.summary))
        case "replicate":
            print(pydantic_to_yaml(replicate(config, settings)))
        case "plot":
            for path in emit_plots(config):
                print(path)
        case "oracle":
            print(pydantic_to_yaml(oracle_report(config, settings)))


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = RuntimeSettings()
    except ValidationError as e:
        print(f"[error] invalid runtime settings: {e}", file=sys.stderr)
        return EXIT_CONFIG
    logger.remove()
    logger.add(sys.stderr, level=settings.log_level)

    try:
        dispatch(args, settings)
    except (ConfigError, InfeasibleError) as e:
        logger.error(e.message)
        return EXIT_CONFIG
    except SolverError as e:
        logger.error(e.message)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
