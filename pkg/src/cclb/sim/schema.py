# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

import itertools

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from cclb.core.exception import DimensionError, InfeasibleError
from cclb.core.policy import Branch
from cclb.util import as_matrix, as_vector

INCREMENT_FLOOR = -1e-9


class Environment(BaseModel):
    """
    Environment is the simulated constrained bandit: r = θ*ᵀx + η_r and c = Γ*x + η_c, with
    N(0, R²) noise.

    Attributes:
        theta_star (np.ndarray): Reward parameter, length d.
        gamma_star (np.ndarray): Cost parameters, m×d.
        tau (np.ndarray): Thresholds, length m.
        noise_scale (float): R.
        rng_seed (int): Seed of the run's random stream.
        safe_action (np.ndarray | None): x₀; when given, Γ*x₀ < τ is enforced.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    theta_star: np.ndarray
    gamma_star: np.ndarray
    tau: np.ndarray
    noise_scale: float = Field(ge=0)
    rng_seed: int = 0
    safe_action: np.ndarray | None = None

    @field_validator("theta_star", "tau", "safe_action", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return None if value is None else as_vector(value)

    @field_validator("gamma_star", mode="before")
    @classmethod
    def _as_matrix(cls, value):
        return as_matrix(value, name="gamma_star")

    @model_validator(mode="after")
    def _check_environment(self):
        m, d = self.gamma_star.shape
        if self.theta_star.shape[0] != d:
            raise DimensionError(
                f"theta_star has {self.theta_star.shape[0]} entries, gamma_star has {d} columns"
            )
        if self.tau.shape[0] != m:
            raise DimensionError(f"tau has {self.tau.shape[0]} entries, gamma_star has {m} rows")
        if self.safe_action is not None and np.any(self.gamma_star @ self.safe_action >= self.tau):
            raise InfeasibleError(
                f"safe action costs {self.gamma_star @ self.safe_action} are not strictly below {self.tau}"
            )
        return self

    @property
    def dim(self) -> int:
        return self.theta_star.shape[0]

    @property
    def num_constraints(self) -> int:
        return self.tau.shape[0]

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed)


class LedgerRecord(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    t: int = Field(ge=1)
    optimal_value: float
    policy_value: float
    regret_increment: float = Field(ge=INCREMENT_FLOOR)
    cumulative_regret: float
    costs: np.ndarray
    violation: bool
    branch: Branch
    sampled_regret: float


class RegretLedger(BaseModel):
    """
    RegretLedger collects one record per round; `cumulative_regret` is the running sum of increments.

    It serializes to CSV with columns t, optimal_value, policy_value, regret_increment, cumulative_regret,
    cost_1..cost_m, violation, branch, sampled_regret.
    """

    num_constraints: int = Field(ge=1)
    records: list[LedgerRecord] = Field(default_factory=list)

    @property
    def cumulative_regret(self) -> float:
        return self.records[-1].cumulative_regret if self.records else 0.0

    @property
    def violations(self) -> int:
        return sum(rec.violation for rec in self.records)

    def append(
        self,
        optimal_value: float,
        policy_value: float,
        increment: float,
        costs: np.ndarray,
        violation: bool,
        branch: Branch,
        sampled_regret: float,
    ) -> LedgerRecord:
        record = LedgerRecord(
            t=len(self.records) + 1,
            optimal_value=optimal_value,
            policy_value=policy_value,
            regret_increment=increment,
            cumulative_regret=self.cumulative_regret + increment,
            costs=as_vector(costs, self.num_constraints, name="costs"),
            violation=violation,
            branch=branch,
            sampled_regret=sampled_regret,
        )
        self.records.append(record)
        return record

    def branch_counts(self) -> dict[str, int]:
        counts = {branch.value: 0 for branch in Branch}
        for rec in self.records:
            counts[rec.branch.value] += 1
        return {k: v for k, v in counts.items() if v}

    def recomputed_cumulative(self) -> list[float]:
        return list(itertools.accumulate(rec.regret_increment for rec in self.records))

    @property
    def cost_columns(self) -> list[str]:
        return [f"cost_{j + 1}" for j in range(self.num_constraints)]

    def to_frame(self) -> pd.DataFrame:
        columns = [
            "t",
            "optimal_value",
            "policy_value",
            "regret_increment",
            "cumulative_regret",
            *self.cost_columns,
            "violation",
            "branch",
            "sampled_regret",
        ]
        rows = [
            [
                rec.t,
                rec.optimal_value,
                rec.policy_value,
                rec.regret_increment,
                rec.cumulative_regret,
                *rec.costs.tolist(),
                rec.violation,
                rec.branch.value,
                rec.sampled_regret,
            ]
            for rec in self.records
        ]
        return pd.DataFrame(rows, columns=columns)

    @classmethod
    def from_frame(cls, frame: pd.DataFrame) -> "RegretLedger":
        cost_columns = sorted(
            (c for c in frame.columns if c.startswith("cost_")), key=lambda c: int(c.split("_")[1])
        )
        if not cost_columns:
            raise DimensionError("ledger has no cost columns")
        ledger = cls(num_constraints=len(cost_columns))
        for row in frame.itertuples(index=False):
            data = row._asdict()
            ledger.records.append(
                LedgerRecord(
                    t=int(data["t"]),
                    optimal_value=float(data["optimal_value"]),
                    policy_value=float(data["policy_value"]),
                    regret_increment=float(data["regret_increment"]),
                    cumulative_regret=float(data["cumulative_regret"]),
                    costs=np.array([float(data[c]) for c in cost_columns]),
                    violation=bool(data["violation"]),
                    branch=Branch(data["branch"]),
                    sampled_regret=float(data["sampled_regret"]),
                )
            )
        return ledger
