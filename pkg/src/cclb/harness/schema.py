# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from pathlib import Path
from typing import Annotated, Literal, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from cclb.core.decision import (
    ConicPiece,
    ball_piece,
    box_piece,
    ellipsoid_piece,
    point_piece,
    polytope_piece,
)
from cclb.core.exception import ConfigError


class _PieceSpec(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BallSpec(_PieceSpec):
    type: Literal["ball"] = "ball"
    center: list[float]
    radius: float = Field(gt=0)

    @property
    def dim(self) -> int:
        return len(self.center)

    def build(self) -> ConicPiece:
        return ball_piece(self.center, self.radius)


class BoxSpec(_PieceSpec):
    type: Literal["box"] = "box"
    lower: list[float]
    upper: list[float]

    @property
    def dim(self) -> int:
        return len(self.lower)

    def build(self) -> ConicPiece:
        return box_piece(self.lower, self.upper)


class PolytopeSpec(_PieceSpec):
    """{x : A·x ≤ b}."""

    type: Literal["polytope"] = "polytope"
    A: list[list[float]]
    b: list[float]

    @property
    def dim(self) -> int:
        return len(self.A[0]) if self.A else 0

    def build(self) -> ConicPiece:
        return polytope_piece(self.A, self.b)


class EllipsoidSpec(_PieceSpec):
    """{x : ‖Q·(x − center)‖ ≤ 1}."""

    type: Literal["ellipsoid"] = "ellipsoid"
    center: list[float]
    shape: list[list[float]]

    @property
    def dim(self) -> int:
        return len(self.center)

    def build(self) -> ConicPiece:
        return ellipsoid_piece(self.center, self.shape)


class PointSpec(_PieceSpec):
    type: Literal["point"] = "point"
    point: list[float]

    @property
    def dim(self) -> int:
        return len(self.point)

    def build(self) -> ConicPiece:
        return point_piece(self.point)


PieceSpec = Annotated[
    Union[BallSpec, BoxSpec, PolytopeSpec, EllipsoidSpec, PointSpec],
    Field(discriminator="type"),
]

Algorithm = Literal["l1_oplb", "ubm_oplb", "oracle_only"]


class ExperimentConfig(BaseModel):
    """
    ExperimentConfig is the full description of one experiment, read from a JSON file.

    Attributes:
        name (str): Label used in summaries and plots.
        decision_set (list[PieceSpec]): Pieces of the decision set.
        theta_star (list[float]): True reward parameter θ*.
        gamma_star (list[list[float]]): True cost parameters Γ*, one row per constraint.
        tau (list[float]): Thresholds τ.
        safe_action (list[float]): x₀; its true cost is taken as c₀ = 0 by the algorithms.
        algorithm (Algorithm): l1_oplb, ubm_oplb or oracle_only.
        horizon (int): Rounds T per run.
        replicates (int): Runs N of a replicated study.
        master_seed (int): Run i uses seed master_seed XOR i.
        regularization (float): λ.
        delta (float): Failure probability δ.
        noise_scale (float): R, the standard deviation of reward and cost noise.
        param_bound (float): S with ‖θ*‖ ≤ S; cost rows are assumed bounded by S².
        norm_bound (float | None): L override; computed from the decision set when absent.
        use_literal_gram_norm (bool): Use √(zᵀΣz) in the pessimistic bound instead of √(zᵀΣ⁻¹z).
        activity_tol (float | None): UBM exactness tolerance; 1e−6·(1 + max|τ|) when absent.
        output_dir (str): Where artifacts are written.
        illustrative (bool): Marks presets whose geometry is not numerically given by any source.
        highlight_rounds (list[int]): Rounds emphasized on the trajectory plot.
    """

    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    decision_set: list[PieceSpec] = Field(min_length=1)
    theta_star: list[float]
    gamma_star: list[list[float]]
    tau: list[float]
    safe_action: list[float]
    algorithm: Algorithm = "ubm_oplb"
    horizon: int = Field(ge=1)
    replicates: int = Field(default=1, ge=1)
    master_seed: int = 0
    regularization: float = Field(gt=0)
    delta: float = Field(gt=0, lt=1)
    noise_scale: float = Field(ge=0)
    param_bound: float = Field(ge=0)
    norm_bound: float | None = Field(default=None, gt=0)
    use_literal_gram_norm: bool = False
    activity_tol: float | None = Field(default=None, gt=0)
    output_dir: str = "runs/experiment"
    illustrative: bool = False
    highlight_rounds: list[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_config(self):
        d = len(self.theta_star)
        if d == 0:
            raise ConfigError("theta_star is empty")
        for i, piece in enumerate(self.decision_set):
            if piece.dim != d:
                raise ConfigError(f"decision_set[{i}] lives in R^{piece.dim}, theta_star in R^{d}")
        if not self.gamma_star or any(len(row) != d for row in self.gamma_star):
            raise ConfigError(f"gamma_star needs rows of length {d}")
        if len(self.tau) != len(self.gamma_star):
            raise ConfigError(f"tau has {len(self.tau)} entries for {len(self.gamma_star)} cost rows")
        if len(self.safe_action) != d:
            raise ConfigError(f"safe_action has {len(self.safe_action)} entries, expected {d}")
        costs = np.asarray(self.gamma_star) @ np.asarray(self.safe_action)
        if np.any(costs >= np.asarray(self.tau)):
            raise ConfigError(f"tau {self.tau} must exceed the safe action costs {costs.tolist()} rowwise")
        return self

    @property
    def dim(self) -> int:
        return len(self.theta_star)

    def seed_for(self, run_index: int) -> int:
        return self.master_seed ^ run_index


class RunSummary(BaseModel):
    name: str
    algorithm: Algorithm
    seed: int
    horizon: int
    optimal_value: float
    optimal_mean: list[float]
    final_cumulative_regret: float
    violation_count: int
    branch_counts: dict[str, int]
    subproblem_solves: int
    completed_rounds: int


class RunArtifacts(BaseModel):
    """Paths written by one run, together with its summary."""

    ledger_path: Path
    trajectory_path: Path
    summary_path: Path
    summary: RunSummary


class ReplicateSummary(BaseModel):
    name: str
    algorithm: Algorithm
    replicates: int
    horizon: int
    master_seed: int
    mean_terminal_regret: float
    p10_terminal_regret: float
    p90_terminal_regret: float
    violation_free_fraction: float
    failed_runs: list[int]
    curves_path: Path
    histogram_path: Path
    terminal_path: Path


class ReplicateOutcome(BaseModel):
    """One replicate as seen by the aggregator: artifacts on success, the error message otherwise."""

    run_index: int
    seed: int
    artifacts: RunArtifacts | None = None
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.artifacts is not None


class SupportPoint(BaseModel):
    point: list[float]
    weight: float


class OracleReport(BaseModel):
    """The omniscient policy of a configured problem, as printed by `cclb oracle`."""

    name: str
    optimal_value: float
    mean: list[float]
    costs: list[float]
    tau: list[float]
    support: list[SupportPoint]
