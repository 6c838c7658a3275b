# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from cclb.core.conic import Cone, ConicConstraint, ConicProgram, SolverStatus, solve_conic
from cclb.core.exception import DecisionSetError, DimensionError


class ConicPiece(BaseModel):
    """
    ConicPiece is one convex piece {x : A·x + b ∈ K} of a decision set.

    The rows of A and b are split into consecutive cone blocks by `cones`. Orthant rows encode
    polytopes, second-order blocks encode balls and ellipsoids, zero blocks encode single points.

    Attributes:
        A (np.ndarray): rows × d matrix.
        b (np.ndarray): Offset of length rows.
        cones (list[Cone]): Cone blocks whose dims sum to rows.
        kind (str): Label of the shape the piece was compiled from.
        norm_hint (float | None): Exact max ‖x‖ over the piece when the shape makes it cheap.
        lower (np.ndarray | None): Bounding-box lower corner; computed by support solves when absent.
        upper (np.ndarray | None): Bounding-box upper corner; computed by support solves when absent.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    A: np.ndarray
    b: np.ndarray
    cones: list[Cone] = Field(min_length=1)
    kind: str = "conic"
    norm_hint: float | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

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
    def _check_piece(self):
        rows = sum(cone.dim for cone in self.cones)
        if self.A.ndim != 2 or self.A.shape[0] != rows or self.b.shape[0] != rows:
            raise DimensionError(
                f"piece rows disagree: A {self.A.shape}, b {self.b.shape}, cones cover {rows} rows"
            )
        if self.lower is None or self.upper is None:
            self.lower, self.upper = self._support_box()
        return self

    @property
    def dim(self) -> int:
        return self.A.shape[1]

    @property
    def norm_bound(self) -> float:
        box_bound = float(np.linalg.norm(np.maximum(np.abs(self.lower), np.abs(self.upper))))
        return box_bound if self.norm_hint is None else min(self.norm_hint, box_bound)

    def blocks(self) -> list[ConicConstraint]:
        out = []
        start = 0
        for cone in self.cones:
            stop = start + cone.dim
            out.append(ConicConstraint(A=self.A[start:stop], b=self.b[start:stop], cone=cone))
            start = stop
        return out

    def contains(self, x: np.ndarray, tol: float = 1e-6) -> bool:
        return all(block.violation(x) <= tol for block in self.blocks())

    def _support_box(self) -> tuple[np.ndarray, np.ndarray]:
        d = self.dim
        blocks = self.blocks()
        feasible = solve_conic(ConicProgram(num_vars=d, objective=np.zeros(d), constraints=blocks))
        if feasible.status is SolverStatus.INFEASIBLE:
            raise DecisionSetError(f"{self.kind} piece is empty")

        lower, upper = np.empty(d), np.empty(d)
        for j in range(d):
            for sign, target in ((1.0, upper), (-1.0, lower)):
                direction = np.zeros(d)
                direction[j] = sign
                sol = solve_conic(ConicProgram(num_vars=d, objective=direction, constraints=blocks))
                if sol.status is SolverStatus.UNBOUNDED:
                    axis = f"{'+' if sign > 0 else '-'}e_{j}"
                    raise DecisionSetError(f"{self.kind} piece is unbounded along {axis}")
                if not sol.is_optimal:
                    raise DecisionSetError(f"support solve along e_{j} ended with {sol.status.value}")
                target[j] = sign * sol.objective_value
        logger.debug(f"{self.kind} piece bounded in [{lower}, {upper}]")
        return lower, upper


class HullLift(BaseModel):
    """
    HullLift is the perspective reformulation of Co(D) as a single conic program.

    Variables are stacked as (z, x_1, …, x_k, α_1, …, α_k[, s]) where s is an optional epigraph
    variable.

    Attributes:
        program (ConicProgram): The lifted program.
        dim (int): Ambient dimension d.
        pieces (list[ConicPiece]): The pieces the x_i blocks belong to.
        z_index (tuple[int, int]): Slice of z.
        x_index (list[tuple[int, int]]): Slice of each x_i.
        alpha_index (list[int]): Position of each α_i.
        epigraph_index (int | None): Position of s, when present.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    program: ConicProgram
    dim: int
    pieces: list[ConicPiece]
    z_index: tuple[int, int]
    x_index: list[tuple[int, int]]
    alpha_index: list[int]
    epigraph_index: int | None = None

    def z(self, point: np.ndarray) -> np.ndarray:
        return point[self.z_index[0] : self.z_index[1]]

    def x(self, point: np.ndarray, i: int) -> np.ndarray:
        start, stop = self.x_index[i]
        return point[start:stop]

    def alpha(self, point: np.ndarray) -> np.ndarray:
        return point[self.alpha_index]
