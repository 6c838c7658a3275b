# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

import asyncio
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import orjson
import pandas as pd
from loguru import logger

from cclb.core.exception import ConfigError, SolverError
from cclb.harness.config import build_decision_set
from cclb.harness.runner import CACHE_DIR, cached_oracle, run_experiment
from cclb.harness.schema import ExperimentConfig, ReplicateOutcome, ReplicateSummary
from cclb.settings import RuntimeSettings
from cclb.sim.ledger import FLOAT_FORMAT

HISTOGRAM_BINS = 40
CURVES_FILE = "regret_curves.csv"
HISTOGRAM_FILE = "histogram.csv"
TERMINAL_FILE = "terminal.csv"
SUMMARY_FILE = "replicate_summary.json"


def run_dir(root: Path, run_index: int) -> Path:
    return root / f"run_{run_index:04d}"


def _replicate_worker(
    config: ExperimentConfig,
    run_index: int,
    root: Path,
    cache_dir: Path | None,
    settings: RuntimeSettings,
) -> ReplicateOutcome:
    # Errors are returned as text so nothing has to be unpickled across the process boundary.
    seed = config.seed_for(run_index)
    try:
        artifacts = run_experiment(
            config,
            run_index=run_index,
            output_dir=run_dir(root, run_index),
            settings=settings,
            cache_dir=cache_dir,
        )
    except Exception as e:
        logger.warning(f"replicate {run_index} (seed {seed}) failed: {e}")
        return ReplicateOutcome(run_index=run_index, seed=seed, error=str(e))
    return ReplicateOutcome(run_index=run_index, seed=seed, artifacts=artifacts)


def _curve(outcome: ReplicateOutcome) -> np.ndarray:
    frame = pd.read_csv(outcome.artifacts.ledger_path, float_precision="round_trip")
    return frame["cumulative_regret"].to_numpy(dtype=float)


def regret_bands(curves: np.ndarray) -> pd.DataFrame:
    """Per-round mean and 10/90 percentiles of an (N, T) array of cumulative-regret curves."""
    p10, p90 = np.percentile(curves, [10, 90], axis=0)
    return pd.DataFrame(
        {"t": np.arange(1, curves.shape[1] + 1), "mean": curves.mean(axis=0), "p10": p10, "p90": p90}
    )


def terminal_histogram(terminal: np.ndarray, bins: int = HISTOGRAM_BINS) -> pd.DataFrame:
    """Equal-width bins over [0, max terminal regret]; [0, 1] when every run ended at zero."""
    upper = float(terminal.max()) if terminal.size and terminal.max() > 0 else 1.0
    counts, edges = np.histogram(np.clip(terminal, 0.0, None), bins=bins, range=(0.0, upper))
    return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts})


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def _aggregate(config: ExperimentConfig, root: Path, outcomes: list[ReplicateOutcome]) -> ReplicateSummary:
    outcomes = sorted(outcomes, key=lambda o: o.run_index)
    done = [o for o in outcomes if o.ok]
    failed = [o.run_index for o in outcomes if not o.ok]

    terminal_path = _write_csv(
        pd.DataFrame(
            [
                {
                    "run": o.run_index,
                    "seed": o.seed,
                    "status": "ok" if o.ok else "failed",
                    "terminal_regret": o.artifacts.summary.final_cumulative_regret if o.ok else np.nan,
                    "violation_count": o.artifacts.summary.violation_count if o.ok else -1,
                    "error": o.error or "",
                }
                for o in outcomes
            ],
            columns=["run", "seed", "status", "terminal_regret", "violation_count", "error"],
        ),
        root / TERMINAL_FILE,
    )
    if not done:
        raise SolverError(f"all {len(outcomes)} replicates failed, see {terminal_path}")

    curves = np.vstack([_curve(o) for o in done])
    terminal = curves[:, -1]
    curves_path = _write_csv(regret_bands(curves), root / CURVES_FILE)
    histogram_path = _write_csv(terminal_histogram(terminal), root / HISTOGRAM_FILE)

    p10, p90 = np.percentile(terminal, [10, 90])
    summary = ReplicateSummary(
        name=config.name,
        algorithm=config.algorithm,
        replicates=config.replicates,
        horizon=config.horizon,
        master_seed=config.master_seed,
        mean_terminal_regret=float(terminal.mean()),
        p10_terminal_regret=float(p10),
        p90_terminal_regret=float(p90),
        violation_free_fraction=sum(o.artifacts.summary.violation_count == 0 for o in done) / len(done),
        failed_runs=failed,
        curves_path=curves_path,
        histogram_path=histogram_path,
        terminal_path=terminal_path,
    )
    payload = orjson.dumps(summary.model_dump(mode="json"), option=orjson.OPT_INDENT_2)
    (root / SUMMARY_FILE).write_bytes(payload)
    return summary


async def replicate_async(
    config: ExperimentConfig, settings: RuntimeSettings | None = None
) -> ReplicateSummary:
    """
    Run `config.replicates` seeded runs and aggregate their regret curves.

    Runs go to a process pool of `settings.max_workers` workers (in-process when it is 1). A failing
    run is recorded with its index and the remaining runs still complete; aggregation is ordered by
    run index, so the result does not depend on completion order.

    Args:
        config (ExperimentConfig): The experiment; run i writes to <output_dir>/run_<i>.
        settings (RuntimeSettings | None): Worker count, log level and oracle caching.

    Returns:
        ReplicateSummary: Terminal-regret statistics and the paths of the aggregate CSVs.
    """
    settings = settings or RuntimeSettings()
    if config.replicates < 2:
        raise ConfigError(f"replicate needs at least 2 replicates, got {config.replicates}")
    root = Path(config.output_dir)
    root.mkdir(parents=True, exist_ok=True)

    cache_dir = None
    if settings.cache_oracle:
        cache_dir = root / CACHE_DIR
        cached_oracle(config, build_decision_set(config), cache_dir)

    n = config.replicates
    logger.info(f"replicating {config.name} [{config.algorithm}] {n} times, {settings.max_workers} workers")
    if settings.max_workers <= 1:
        outcomes = [_replicate_worker(config, i, root, cache_dir, settings) for i in range(n)]
    else:
        loop = asyncio.get_running_loop()
        with ProcessPoolExecutor(min(settings.max_workers, n)) as pool:
            tasks = [
                loop.run_in_executor(pool, _replicate_worker, config, i, root, cache_dir, settings)
                for i in range(n)
            ]
            outcomes = await asyncio.gather(*tasks)

    summary = _aggregate(config, root, list(outcomes))
    if summary.failed_runs:
        logger.warning(f"{len(summary.failed_runs)} replicates failed: {summary.failed_runs}")
    logger.info(
        f"mean terminal regret {summary.mean_terminal_regret:.4f} "
        f"[p10 {summary.p10_terminal_regret:.4f}, p90 {summary.p90_terminal_regret:.4f}], "
        f"violation-free {summary.violation_free_fraction:.1%}"
    )
    return summary


def replicate(config: ExperimentConfig, settings: RuntimeSettings | None = None) -> ReplicateSummary:
    return asyncio.run(replicate_async(config, settings))


def read_replicate_summary(path: str | Path) -> ReplicateSummary:
    return ReplicateSummary.model_validate(orjson.loads(Path(path).read_bytes()))
