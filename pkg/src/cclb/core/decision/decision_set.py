# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from typing import Sequence

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from cclb.core.conic import Cone, ConicConstraint, ConicProgram, ConicSolution, solve_conic
from cclb.core.decision.schema import ConicPiece, HullLift
from cclb.core.exception import DecisionSetError, DimensionError, PolicyError, SolverError
from cclb.settings import SolverTolerances
from cclb.util import as_matrix, as_vector

EPS_ALPHA = 1e-9
CONTAINS_TOL = 1e-6

LinearCut = tuple[np.ndarray, float]
"""(a, t) meaning aᵀz ≤ t."""

SocCut = tuple[np.ndarray, np.ndarray, float]
"""(M, g, t) meaning ‖M·z‖₂ + gᵀz ≤ t."""


def ball_piece(center: Sequence[float], radius: float) -> ConicPiece:
    c = as_vector(center, name="center")
    if radius < 0:
        raise DecisionSetError(f"ball radius must be nonnegative, got {radius}")
    d = c.shape[0]
    # (r, x − c) ∈ SOC
    A = np.vstack([np.zeros((1, d)), np.eye(d)])
    b = np.concatenate([[radius], -c])
    return ConicPiece(
        A=A,
        b=b,
        cones=[Cone.second_order(d + 1)],
        kind="ball",
        norm_hint=float(np.linalg.norm(c) + radius),
        lower=c - radius,
        upper=c + radius,
    )


def ellipsoid_piece(center: Sequence[float], shape: Sequence[Sequence[float]]) -> ConicPiece:
    """{x : ‖Q(x − c)‖₂ ≤ 1} for an invertible Q."""
    c = as_vector(center, name="center")
    Q = as_matrix(shape, cols=c.shape[0], name="shape")
    if Q.shape[0] != Q.shape[1] or abs(np.linalg.det(Q)) < 1e-12:
        raise DecisionSetError("ellipsoid shape matrix must be square and invertible")
    d = c.shape[0]
    half_widths = np.sqrt(np.diag(np.linalg.inv(Q.T @ Q)))
    A = np.vstack([np.zeros((1, d)), Q])
    b = np.concatenate([[1.0], -Q @ c])
    return ConicPiece(
        A=A,
        b=b,
        cones=[Cone.second_order(d + 1)],
        kind="ellipsoid",
        norm_hint=float(np.linalg.norm(c) + 1.0 / np.linalg.svd(Q, compute_uv=False).min()),
        lower=c - half_widths,
        upper=c + half_widths,
    )


def box_piece(lower: Sequence[float], upper: Sequence[float]) -> ConicPiece:
    lo = as_vector(lower, name="lower")
    hi = as_vector(upper, lo.shape[0], name="upper")
    if np.any(lo > hi):
        raise DecisionSetError("box lower corner exceeds upper corner")
    d = lo.shape[0]
    # x − l ≥ 0, u − x ≥ 0
    return ConicPiece(
        A=np.vstack([np.eye(d), -np.eye(d)]),
        b=np.concatenate([-lo, hi]),
        cones=[Cone.nonnegative(2 * d)],
        kind="box",
        norm_hint=float(np.linalg.norm(np.maximum(np.abs(lo), np.abs(hi)))),
        lower=lo,
        upper=hi,
    )


def polytope_piece(A: Sequence[Sequence[float]], b: Sequence[float]) -> ConicPiece:
    """{x : A·x ≤ b}; emptiness and boundedness are checked by solves."""
    G = as_matrix(A, name="A")
    h = as_vector(b, G.shape[0], name="b")
    return ConicPiece(A=-G, b=h, cones=[Cone.nonnegative(G.shape[0])], kind="polytope")


def point_piece(point: Sequence[float]) -> ConicPiece:
    p = as_vector(point, name="point")
    return ConicPiece(
        A=np.eye(p.shape[0]),
        b=-p,
        cones=[Cone.zero(p.shape[0])],
        kind="point",
        norm_hint=float(np.linalg.norm(p)),
        lower=p,
        upper=p,
    )


class DecisionSet(BaseModel):
    """
    DecisionSet is a union of convex conic pieces together with a universally safe action x₀.

    Attributes:
        pieces (list[ConicPiece]): The convex pieces D^1, …, D^k.
        ambient_dim (int): Dimension d shared by all pieces.
        safe_action (np.ndarray): x₀, which must belong to the set.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    pieces: list[ConicPiece] = Field(min_length=1)
    ambient_dim: int = Field(ge=1)
    safe_action: np.ndarray

    @field_validator("safe_action", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return np.asarray(value, dtype=float).reshape(-1)

    @model_validator(mode="after")
    def _check_set(self):
        for i, piece in enumerate(self.pieces):
            if piece.dim != self.ambient_dim:
                raise DimensionError(f"piece {i} lives in R^{piece.dim}, expected R^{self.ambient_dim}")
        if self.safe_action.shape[0] != self.ambient_dim:
            raise DimensionError(f"safe action has {self.safe_action.shape[0]} entries")
        if not self.contains(self.safe_action, CONTAINS_TOL):
            raise DecisionSetError(f"safe action {self.safe_action} is not in the decision set")
        return self

    @property
    def num_pieces(self) -> int:
        return len(self.pieces)

    @property
    def norm_bound(self) -> float:
        """L: an upper bound on ‖x‖ over the set."""
        return max(piece.norm_bound for piece in self.pieces)

    def contains(self, x: np.ndarray, tol: float = CONTAINS_TOL) -> bool:
        x = as_vector(x, self.ambient_dim, name="x")
        return any(piece.contains(x, tol) for piece in self.pieces)

    def project(self, x: np.ndarray, piece: int, tol: SolverTolerances | None = None) -> np.ndarray:
        """Euclidean projection of x onto one piece."""
        x = as_vector(x, self.ambient_dim, name="x")
        d = self.ambient_dim
        # variables (y, s): maximize −s s.t. (s, x − y) ∈ SOC and y in the piece
        distance = ConicConstraint(
            A=np.block([[np.zeros((1, d)), np.ones((1, 1))], [-np.eye(d), np.zeros((d, 1))]]),
            b=np.concatenate([[0.0], x]),
            cone=Cone.second_order(d + 1),
        )
        membership = [
            ConicConstraint(A=np.hstack([blk.A, np.zeros((blk.A.shape[0], 1))]), b=blk.b, cone=blk.cone)
            for blk in self.pieces[piece].blocks()
        ]
        objective = np.zeros(d + 1)
        objective[-1] = -1.0
        program = ConicProgram(num_vars=d + 1, objective=objective, constraints=[distance, *membership])
        sol = solve_conic(program, tol)
        if not sol.is_optimal:
            raise SolverError(f"projection onto piece {piece} ended with {sol.status.value}")
        return sol.point[:d]


def hull_lift(
    decision_set: DecisionSet,
    objective: np.ndarray,
    extra_linear: Sequence[LinearCut] = (),
    extra_soc: Sequence[SocCut] = (),
    epigraph: Sequence[LinearCut] = (),
) -> HullLift:
    """
    Lift max objectiveᵀz over Co(D) ∩ {extra constraints} into one conic program.

    Each piece {x : A_i·x + b_i ∈ K_i} enters through its closed perspective A_i·x_i + α_i·b_i ∈ K_i,
    with α ≥ 0, Σα = 1 and z = Σx_i. When `epigraph` rows (a_j, t_j) are given, an extra variable s with
    s ≤ a_jᵀz + t_j is added and the objective becomes objectiveᵀz + s.

    Args:
        decision_set (DecisionSet): The union of pieces.
        objective (np.ndarray): Linear objective on z.
        extra_linear (Sequence[LinearCut]): Rows aᵀz ≤ t.
        extra_soc (Sequence[SocCut]): Rows ‖M·z‖ + gᵀz ≤ t.
        epigraph (Sequence[LinearCut]): Rows of a concave piecewise-linear bonus min_j(a_jᵀz + t_j).

    Returns:
        HullLift: The program and the index map of its variables.
    """
    d = decision_set.ambient_dim
    k = decision_set.num_pieces
    c = as_vector(objective, d, name="objective")
    n = d + k * d + k + (1 if epigraph else 0)

    z_index = (0, d)
    x_index = [(d + i * d, d + (i + 1) * d) for i in range(k)]
    alpha_index = [d + k * d + i for i in range(k)]
    epigraph_index = n - 1 if epigraph else None

    def rows(count: int) -> np.ndarray:
        return np.zeros((count, n))

    constraints = []

    A = rows(k)
    A[np.arange(k), alpha_index] = 1.0
    constraints.append(ConicConstraint(A=A, b=np.zeros(k), cone=Cone.nonnegative(k)))

    A = rows(1)
    A[0, alpha_index] = 1.0
    constraints.append(ConicConstraint(A=A, b=[-1.0], cone=Cone.zero(1)))

    A = rows(d)
    A[:, 0:d] = np.eye(d)
    for start, stop in x_index:
        A[:, start:stop] = -np.eye(d)
    constraints.append(ConicConstraint(A=A, b=np.zeros(d), cone=Cone.zero(d)))

    for i, piece in enumerate(decision_set.pieces):
        start, stop = x_index[i]
        for blk in piece.blocks():
            A = rows(blk.cone.dim)
            A[:, start:stop] = blk.A
            A[:, alpha_index[i]] = blk.b
            constraints.append(ConicConstraint(A=A, b=np.zeros(blk.cone.dim), cone=blk.cone))

    if extra_linear:
        A = rows(len(extra_linear))
        b = np.empty(len(extra_linear))
        for j, (a, t) in enumerate(extra_linear):
            A[j, 0:d] = -as_vector(a, d, name="linear cut")
            b[j] = t
        constraints.append(ConicConstraint(A=A, b=b, cone=Cone.nonnegative(len(extra_linear))))

    for M, g, t in extra_soc:
        M = as_matrix(M, cols=d, name="soc cut matrix")
        A = rows(1 + M.shape[0])
        A[0, 0:d] = -as_vector(g, d, name="soc cut vector")
        A[1:, 0:d] = M
        b = np.zeros(1 + M.shape[0])
        b[0] = t
        constraints.append(ConicConstraint(A=A, b=b, cone=Cone.second_order(1 + M.shape[0])))

    full_objective = np.zeros(n)
    full_objective[0:d] = c
    if epigraph:
        A = rows(len(epigraph))
        b = np.empty(len(epigraph))
        for j, (a, t) in enumerate(epigraph):
            A[j, 0:d] = as_vector(a, d, name="epigraph row")
            A[j, epigraph_index] = -1.0
            b[j] = t
        constraints.append(ConicConstraint(A=A, b=b, cone=Cone.nonnegative(len(epigraph))))
        full_objective[epigraph_index] = 1.0

    return HullLift(
        program=ConicProgram(num_vars=n, objective=full_objective, constraints=constraints),
        dim=d,
        pieces=decision_set.pieces,
        z_index=z_index,
        x_index=x_index,
        alpha_index=alpha_index,
        epigraph_index=epigraph_index,
    )


def extract_mixture(
    lift: HullLift,
    solution: ConicSolution,
    eps_alpha: float = EPS_ALPHA,
    tol: float = CONTAINS_TOL,
    decision_set: DecisionSet | None = None,
) -> list[tuple[np.ndarray, float]]:
    """
    Recover the finite mixture behind z* = Σ α_i·(x_i/α_i).

    Pieces with α_i ≤ eps_alpha are dropped and the remaining weights renormalized. A recovered point
    that misses its piece by more than `tol` (division by a small α_i amplifies solver error) is
    projected back onto the piece when `decision_set` is given.

    Returns:
        list[tuple[np.ndarray, float]]: (point, weight) pairs, weights summing to one.
    """
    if not solution.is_optimal:
        raise PolicyError(f"cannot extract a mixture from a {solution.status.value} solution")
    point = solution.point
    alpha = lift.alpha(point)
    keep = [i for i in range(len(alpha)) if alpha[i] > eps_alpha]
    if not keep:
        raise SolverError(f"degenerate hull solution, all mixture weights below {eps_alpha:g}")

    total = float(sum(alpha[i] for i in keep))
    mixture = []
    for i in keep:
        candidate = lift.x(point, i) / alpha[i]
        if not lift.pieces[i].contains(candidate, tol):
            if decision_set is None:
                raise PolicyError(f"mixture point {candidate} misses piece {i}")
            projected = decision_set.project(candidate, i)
            logger.warning(
                f"mixture point of piece {i} (weight {alpha[i]:.2e}) projected by "
                f"{np.linalg.norm(projected - candidate):.2e}"
            )
            candidate = projected
        mixture.append((candidate, float(alpha[i]) / total))
    return mixture
