"""Compare ℓ1 OPLB with UBM OPLB on the unit-disk problem at desk scale.

Writes both replicate studies under runs/comparison/, a joint regret-band and histogram figure and the
mean-policy trajectories of the first run of each study. Set CCLB_MAX_WORKERS to bound the process pool.
"""

from pathlib import Path

import pandas as pd
from loguru import logger

from cclb.harness import load_preset, replicate, with_overrides
from cclb.harness.plots import (
    histogram_figure,
    regret_bands_figure,
    save_figure,
    trajectory_comparison_figure,
)
from cclb.harness.replication import run_dir
from cclb.harness.runner import SUMMARY_FILE, TRAJECTORY_FILE, read_summary, read_trajectory

ROOT = "runs/comparison"


def main():
    base = load_preset("unit_disk").model_copy(update={"horizon": 1000, "replicates": 20})
    configs = {
        algorithm: with_overrides(base, output_dir=f"{ROOT}/{algorithm}", algorithm=algorithm)
        for algorithm in ("l1_oplb", "ubm_oplb")
    }
    summaries = {algorithm: replicate(config) for algorithm, config in configs.items()}
    for algorithm, summary in summaries.items():
        logger.info(
            f"{algorithm}: mean terminal regret {summary.mean_terminal_regret:.3f}, "
            f"violation-free {summary.violation_free_fraction:.0%}"
        )

    curves = {name: pd.read_csv(s.curves_path) for name, s in summaries.items()}
    histograms = {name: pd.read_csv(s.histogram_path) for name, s in summaries.items()}
    save_figure(regret_bands_figure(curves), f"{ROOT}/regret_bands.svg")
    save_figure(histogram_figure(histograms), f"{ROOT}/histogram.svg")

    first = {name: run_dir(Path(config.output_dir), 0) for name, config in configs.items()}
    trajectories = {name: read_trajectory(path / TRAJECTORY_FILE) for name, path in first.items()}
    optimal_mean = read_summary(first["ubm_oplb"] / SUMMARY_FILE).optimal_mean
    figure = trajectory_comparison_figure(base, trajectories, optimal_mean)
    save_figure(figure, f"{ROOT}/trajectories.svg")


if __name__ == "__main__":
    main()
