# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402
from loguru import logger  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402
from matplotlib.patches import Circle, Polygon, Rectangle  # noqa: E402
from scipy.optimize import linprog  # noqa: E402
from scipy.spatial import ConvexHull, HalfspaceIntersection  # noqa: E402

from cclb.core.exception import ConfigError  # noqa: E402
from cclb.harness.replication import CURVES_FILE, HISTOGRAM_FILE  # noqa: E402
from cclb.harness.runner import (  # noqa: E402
    LEDGER_FILE,
    SUMMARY_FILE,
    TRAJECTORY_FILE,
    read_summary,
    read_trajectory,
)
from cclb.harness.schema import (  # noqa: E402
    BallSpec,
    BoxSpec,
    EllipsoidSpec,
    ExperimentConfig,
    PieceSpec,
    PointSpec,
    PolytopeSpec,
)

OUTLINE = dict(fill=False, edgecolor="0.25", linewidth=1.2)


def _require(frame: pd.DataFrame, columns: list[str], source: str) -> None:
    missing = [c for c in columns if c not in frame.columns]
    if missing:
        raise ConfigError(f"{source} is missing columns {missing}")


def save_figure(fig: Figure, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    logger.info(f"wrote {path}")
    return path


def constraint_points(mu: np.ndarray, tau: float) -> tuple[np.ndarray, np.ndarray]:
    """Two distinct points on the line μᵀx = τ."""
    mu = np.asarray(mu, dtype=float)
    foot = tau * mu / (mu @ mu)
    return foot, foot + np.array([-mu[1], mu[0]])


def _polytope_vertices(spec: PolytopeSpec) -> np.ndarray:
    A, b = np.asarray(spec.A, dtype=float), np.asarray(spec.b, dtype=float)
    # Chebyshev center as the interior point
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    bounds = [(None, None)] * A.shape[1] + [(0, None)]
    res = linprog(np.r_[np.zeros(A.shape[1]), -1.0], A_ub=np.hstack([A, norms]), b_ub=b, bounds=bounds)
    hs = HalfspaceIntersection(np.hstack([A, -b[:, None]]), res.x[:-1])
    points = hs.intersections
    return points[ConvexHull(points).vertices]


def _draw_piece(ax, spec: PieceSpec) -> None:
    match spec:
        case BallSpec():
            ax.add_patch(Circle(spec.center, spec.radius, **OUTLINE))
        case BoxSpec():
            lower, upper = np.asarray(spec.lower), np.asarray(spec.upper)
            ax.add_patch(Rectangle(lower, *(upper - lower), **OUTLINE))
        case EllipsoidSpec():
            angle = np.linspace(0.0, 2 * np.pi, 200)
            circle = np.vstack([np.cos(angle), np.sin(angle)])
            boundary = np.asarray(spec.center) + np.linalg.solve(spec.shape, circle).T
            ax.add_patch(Polygon(boundary, closed=True, **OUTLINE))
        case PolytopeSpec():
            ax.add_patch(Polygon(_polytope_vertices(spec), closed=True, **OUTLINE))
        case PointSpec():
            ax.plot(*spec.point, marker="o", color="0.25", markersize=4, linestyle="none")


def _decision_axes(config: ExperimentConfig, optimal_mean=None) -> tuple[Figure, plt.Axes]:
    if config.dim != 2:
        raise ConfigError(f"trajectory plots need a 2-d decision set, got d = {config.dim}")
    fig, ax = plt.subplots(figsize=(6, 6))
    for spec in config.decision_set:
        _draw_piece(ax, spec)
    for j, (mu, tau) in enumerate(zip(config.gamma_star, config.tau)):
        xy1, xy2 = constraint_points(mu, tau)
        ax.axline(xy1, xy2, color="tab:red", linestyle="--", linewidth=1, label=f"cost {j + 1} = τ")
    ax.plot(*config.safe_action, marker="s", color="black", linestyle="none", label="safe action")
    if optimal_mean is not None:
        ax.plot(
            *np.asarray(optimal_mean, dtype=float),
            marker="*",
            markersize=14,
            color="gold",
            markeredgecolor="black",
            linestyle="none",
            label="$x^*$",
        )
    return fig, ax


def _highlight_rounds(config: ExperimentConfig, t: np.ndarray) -> list[int]:
    # round 0 is the first played round
    return [max(r, 1) for r in config.highlight_rounds] or [int(t[-1])]


def _finish(ax, title: str) -> None:
    ax.set_aspect("equal")
    ax.autoscale_view()
    ax.set_xlabel("$x_1$")
    ax.set_ylabel("$x_2$")
    ax.set_title(title)
    ax.legend(loc="best", fontsize="small")


def trajectory_figure(
    config: ExperimentConfig,
    trajectory: pd.DataFrame | None = None,
    optimal_mean: np.ndarray | list[float] | None = None,
) -> Figure:
    """
    Decision-set outlines, cost boundaries μ_jᵀx = τ_j, the optimal mean x* and the mean-policy path
    colored by round. Highlighted rounds (the last round when none are configured) get a black-bordered
    mean marker and their support points sized by weight.
    """
    fig, ax = _decision_axes(config, optimal_mean)

    if trajectory is not None and len(trajectory):
        _require(trajectory, ["t", "mean_1", "mean_2", "support"], "trajectory")
        means = trajectory[["mean_1", "mean_2"]].to_numpy()
        t = trajectory["t"].to_numpy()
        norm = plt.Normalize(vmin=float(t[0]), vmax=float(max(t[-1], t[0] + 1)))
        if len(means) > 1:
            segments = np.stack([means[:-1], means[1:]], axis=1)
            path = LineCollection(segments, cmap="viridis", norm=norm, linewidth=1.5)
            path.set_array(t[1:])
            ax.add_collection(path)
            fig.colorbar(path, ax=ax, label="round")
        else:
            ax.plot(*means[0], marker=".", color="tab:green")

        for r in _highlight_rounds(config, t):
            row = trajectory.loc[trajectory["t"] == r]
            if row.empty:
                continue
            support = row["support"].iloc[0]
            points = np.array([s["point"] for s in support])
            weights = np.array([s["weight"] for s in support])
            ax.scatter(points[:, 0], points[:, 1], s=20 + 200 * weights, alpha=0.6, label=f"support t = {r}")
            ax.scatter(
                row["mean_1"],
                row["mean_2"],
                c=[r],
                cmap="viridis",
                norm=norm,
                s=80,
                edgecolors="black",
                linewidths=1.5,
                zorder=3,
                label=f"mean t = {r}",
            )

    _finish(ax, f"{config.name}: mean policy trajectory")
    return fig


def trajectory_comparison_figure(
    config: ExperimentConfig,
    trajectories: dict[str, pd.DataFrame],
    optimal_mean: np.ndarray | list[float] | None = None,
) -> Figure:
    """Mean-policy paths of several runs on one problem, one line per label, highlighted rounds bordered."""
    fig, ax = _decision_axes(config, optimal_mean)
    for label, trajectory in trajectories.items():
        if not len(trajectory):
            continue
        _require(trajectory, ["t", "mean_1", "mean_2"], f"trajectory {label!r}")
        (line,) = ax.plot(trajectory["mean_1"], trajectory["mean_2"], linewidth=1.2, alpha=0.8, label=label)
        marks = trajectory.loc[trajectory["t"].isin(_highlight_rounds(config, trajectory["t"].to_numpy()))]
        ax.scatter(
            marks["mean_1"],
            marks["mean_2"],
            color=line.get_color(),
            s=60,
            edgecolors="black",
            linewidths=1.5,
            zorder=3,
        )
    _finish(ax, f"{config.name}: mean policy trajectories")
    return fig


def run_regret_figure(ledger: pd.DataFrame) -> Figure:
    fig, ax = plt.subplots(figsize=(6, 4))
    if len(ledger):
        _require(ledger, ["t", "cumulative_regret"], "ledger")
        ax.plot(ledger["t"], ledger["cumulative_regret"], color="tab:blue")
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative regret")
    return fig


def regret_bands_figure(curves: dict[str, pd.DataFrame]) -> Figure:
    """Mean cumulative regret with the 10/90 percentile band, one curve per label."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, frame in curves.items():
        if not len(frame):
            continue
        _require(frame, ["t", "mean", "p10", "p90"], f"regret curves {label!r}")
        (line,) = ax.plot(frame["t"], frame["mean"], label=label)
        ax.fill_between(frame["t"], frame["p10"], frame["p90"], color=line.get_color(), alpha=0.25)
    ax.set_xlabel("round")
    ax.set_ylabel("cumulative regret")
    if curves:
        ax.legend(loc="upper left")
    return fig


def histogram_figure(histograms: dict[str, pd.DataFrame]) -> Figure:
    fig, ax = plt.subplots(figsize=(6, 4))
    for label, frame in histograms.items():
        if not len(frame):
            continue
        _require(frame, ["bin_left", "bin_right", "count"], f"histogram {label!r}")
        width = frame["bin_right"] - frame["bin_left"]
        ax.bar(frame["bin_left"], frame["count"], width=width, align="edge", alpha=0.6, label=label)
    ax.set_xlabel("terminal regret")
    ax.set_ylabel("runs")
    if histograms:
        ax.legend(loc="upper right")
    return fig


def emit_plots(config: ExperimentConfig, directory: str | Path | None = None) -> list[Path]:
    """
    Render every figure the artifacts in `directory` support.

    A run directory (ledger.csv, trajectory.csv, summary.json) yields regret.svg and, for 2-d problems,
    trajectory.svg with x* marked; a replicate directory (regret_curves.csv, histogram.csv) yields
    regret_bands.svg and histogram.svg.
    """
    directory = Path(directory or config.output_dir)
    written = []
    if (directory / LEDGER_FILE).is_file():
        ledger = pd.read_csv(directory / LEDGER_FILE, float_precision="round_trip")
        written.append(save_figure(run_regret_figure(ledger), directory / "regret.svg"))
        if config.dim == 2:
            path = directory / TRAJECTORY_FILE
            trajectory = read_trajectory(path) if path.is_file() else None
            summary = directory / SUMMARY_FILE
            optimal_mean = read_summary(summary).optimal_mean if summary.is_file() else None
            figure = trajectory_figure(config, trajectory, optimal_mean)
            written.append(save_figure(figure, directory / "trajectory.svg"))
    if (directory / CURVES_FILE).is_file():
        curves = {config.algorithm: pd.read_csv(directory / CURVES_FILE)}
        written.append(save_figure(regret_bands_figure(curves), directory / "regret_bands.svg"))
    if (directory / HISTOGRAM_FILE).is_file():
        histogram = {config.algorithm: pd.read_csv(directory / HISTOGRAM_FILE)}
        written.append(save_figure(histogram_figure(histogram), directory / "histogram.svg"))
    if not written:
        raise ConfigError(f"no run or replicate artifacts found in {directory}")
    return written
