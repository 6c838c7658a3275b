# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from cclb.core.exception import ConicError


class ConeKind(str, Enum):
    NONNEGATIVE = "nonnegative"
    SECOND_ORDER = "second_order"
    ZERO = "zero"


class Cone(BaseModel):
    """
    Cone is one block of a conic constraint.

    Attributes:
        kind (ConeKind): Nonnegative orthant, second-order cone or zero cone.
        dim (int): Number of rows the block occupies. For the second-order cone the first coordinate is
            the bound, i.e. (t, u) ∈ K iff ‖u‖₂ ≤ t.
    """

    model_config = ConfigDict(frozen=True)

    kind: ConeKind
    dim: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_dim(self):
        if self.kind is ConeKind.SECOND_ORDER and self.dim < 2:
            raise ConicError(f"second-order cone needs dim >= 2, got {self.dim}")
        return self

    @classmethod
    def nonnegative(cls, dim: int) -> "Cone":
        return cls(kind=ConeKind.NONNEGATIVE, dim=dim)

    @classmethod
    def second_order(cls, dim: int) -> "Cone":
        return cls(kind=ConeKind.SECOND_ORDER, dim=dim)

    @classmethod
    def zero(cls, dim: int) -> "Cone":
        return cls(kind=ConeKind.ZERO, dim=dim)

    def violation(self, v: np.ndarray) -> float:
        """Distance-like violation of v ∈ K (0 when v is a member)."""
        if self.kind is ConeKind.NONNEGATIVE:
            return float(max(0.0, -np.min(v)))
        if self.kind is ConeKind.ZERO:
            return float(np.max(np.abs(v)))
        return float(max(0.0, np.linalg.norm(v[1:]) - v[0]))


class ConicConstraint(BaseModel):
    """A·x + b ∈ K."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    A: np.ndarray
    b: np.ndarray
    cone: Cone

    @field_validator("A", mode="before")
    @classmethod
    def _as_matrix(cls, value):
        arr = np.asarray(value, dtype=float)
        return arr.reshape(1, -1) if arr.ndim == 1 else arr

    @field_validator("b", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return np.asarray(value, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def _check_rows(self):
        if self.A.ndim != 2:
            raise ConicError(f"constraint matrix must be 2-D, got shape {self.A.shape}")
        rows = self.A.shape[0]
        if rows != self.b.shape[0] or rows != self.cone.dim:
            raise ConicError(
                f"constraint rows disagree: A has {rows}, b has {self.b.shape[0]}, cone has {self.cone.dim}"
            )
        return self

    def violation(self, x: np.ndarray) -> float:
        return self.cone.violation(self.A @ x + self.b)


class ConicProgram(BaseModel):
    """
    ConicProgram is a linear objective over affine-conic constraints:
    maximize cᵀx s.t. A_k·x + b_k ∈ K_k.

    Attributes:
        num_vars (int): Number of decision variables.
        objective (np.ndarray): The vector c.
        constraints (list[ConicConstraint]): Constraint blocks, kept in insertion order.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    num_vars: int = Field(ge=1)
    objective: np.ndarray
    constraints: list[ConicConstraint] = Field(default_factory=list)

    @field_validator("objective", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return np.asarray(value, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def _check_columns(self):
        if self.objective.shape[0] != self.num_vars:
            raise ConicError(f"objective has {self.objective.shape[0]} entries, expected {self.num_vars}")
        for k, con in enumerate(self.constraints):
            if con.A.shape[1] != self.num_vars:
                raise ConicError(f"constraint {k} has {con.A.shape[1]} columns, expected {self.num_vars}")
        return self

    def max_violation(self, x: np.ndarray) -> float:
        return max((con.violation(x) for con in self.constraints), default=0.0)

    def rhs_scale(self) -> float:
        return max((float(np.max(np.abs(con.b))) for con in self.constraints if con.b.size), default=0.0)


class SolverStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_FAILURE = "NumericalFailure"


class ConicSolution(BaseModel):
    """
    ConicSolution is what the solver reports back.

    Attributes:
        status (SolverStatus): Outcome of the solve.
        point (np.ndarray | None): Primal point, present iff Optimal.
        objective_value (float | None): cᵀx at the point, present iff Optimal.
        max_residual (float | None): Largest constraint violation measured at the point. Optimal points
            are accepted up to `residual_ceiling`·(1 + ‖b‖∞), 1e-6 by default, looser than ε_feas.
        iterations (int): Solver iterations used.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    status: SolverStatus
    point: np.ndarray | None = None
    objective_value: float | None = None
    max_residual: float | None = None
    iterations: int = 0

    @model_validator(mode="after")
    def _check_point(self):
        optimal = self.status is SolverStatus.OPTIMAL
        if optimal != (self.point is not None) or optimal != (self.objective_value is not None):
            raise ConicError("point and objective_value must be present exactly when status is Optimal")
        return self

    @property
    def is_optimal(self) -> bool:
        return self.status is SolverStatus.OPTIMAL
