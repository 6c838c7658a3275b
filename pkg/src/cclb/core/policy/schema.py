# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from enum import Enum
from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from cclb.core.exception import PolicyError
from cclb.util import as_vector

WEIGHT_TOL = 1e-9
MEAN_TOL = 1e-8


class Branch(str, Enum):
    L1 = "L1"
    UBM_EXACT = "UBM-exact"
    SAFE_FALLBACK = "SafeFallback"
    ORACLE = "Oracle"


class Policy(BaseModel):
    """
    Policy is a finite-support distribution over actions.

    Attributes:
        support (list[tuple[np.ndarray, float]]): (point, weight) pairs with positive weights summing to one.
        mean (np.ndarray): Σ weight·point.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    support: list[tuple[np.ndarray, float]] = Field(min_length=1)
    mean: np.ndarray

    @field_validator("mean", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return as_vector(value, name="mean")

    @model_validator(mode="after")
    def _check_policy(self):
        weights = np.array([w for _, w in self.support])
        if np.any(weights <= 0):
            raise PolicyError(f"policy weights must be positive, got {weights}")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise PolicyError(f"policy weights sum to {weights.sum():.12f}")
        expected = sum(w * p for p, w in self.support)
        if np.max(np.abs(expected - self.mean)) > MEAN_TOL:
            raise PolicyError("policy mean disagrees with its support")
        return self

    @classmethod
    def from_mixture(cls, mixture: Sequence[tuple[np.ndarray, float]]) -> "Policy":
        """Build a policy from raw (point, weight) pairs, dropping zero weights and renormalizing."""
        pairs = [(as_vector(p), float(w)) for p, w in mixture if w > 0]
        if not pairs:
            raise PolicyError("mixture has no positive weight")
        total = sum(w for _, w in pairs)
        support = [(p, w / total) for p, w in pairs]
        return cls(support=support, mean=sum(w * p for p, w in support))

    @classmethod
    def deterministic(cls, point: np.ndarray) -> "Policy":
        point = as_vector(point)
        return cls(support=[(point, 1.0)], mean=point.copy())

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.support])

    def to_records(self) -> list[dict]:
        return [{"point": p.tolist(), "weight": w} for p, w in self.support]


class StepOutcome(BaseModel):
    """
    StepOutcome is the result of one policy computation.

    Attributes:
        policy (Policy): The policy to play.
        z_star (np.ndarray): Optimal point of the solved program (the policy mean).
        branch (Branch): Which procedure produced the policy.
        objective_value (float): Optimistic objective at z_star.
        subproblem_solves (int): Conic solves spent on the step.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    policy: Policy
    z_star: np.ndarray
    branch: Branch
    objective_value: float
    subproblem_solves: int = 0
