# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from concurrent.futures import Executor
from functools import partial
from typing import Sequence

import numpy as np
from loguru import logger

from cclb.core.conic import ConicSolution, SolverStatus, purify_to_bfs, solve_conic
from cclb.core.decision import DecisionSet, HullLift, extract_mixture, hull_lift
from cclb.core.estimation import (
    ConfidenceGeometry,
    l1_vertices,
    optimistic_bonus,
    pessimistic_cost_bound,
    pessimistic_soc_cuts,
)
from cclb.core.exception import InfeasibleError, PolicyError, SolverError
from cclb.core.policy.schema import Branch, Policy, StepOutcome
from cclb.settings import SolverTolerances
from cclb.util import as_matrix, as_vector

_TIE_TOL = 1e-9
_SLACK_TOL = 1e-6


def default_activity_tol(tau: np.ndarray) -> float:
    return 1e-6 * (1.0 + float(np.max(np.abs(tau))))


def _checked(sol: ConicSolution, what: str) -> ConicSolution:
    if sol.status is SolverStatus.INFEASIBLE:
        raise InfeasibleError(f"{what} is infeasible")
    if not sol.is_optimal:
        raise SolverError(f"{what} ended with {sol.status.value}")
    return sol


def _solve_f(
    theta: np.ndarray,
    geom: ConfidenceGeometry,
    decision_set: DecisionSet,
    tau: np.ndarray,
    tol: SolverTolerances | None = None,
) -> tuple[HullLift, ConicSolution]:
    lift = hull_lift(decision_set, theta, extra_soc=pessimistic_soc_cuts(geom, tau))
    return lift, _checked(solve_conic(lift.program, tol), "pessimistic subproblem")


def evaluate_f(
    theta: np.ndarray,
    geom: ConfidenceGeometry,
    decision_set: DecisionSet,
    tau: np.ndarray,
    tol: SolverTolerances | None = None,
) -> tuple[float, np.ndarray]:
    """
    f(θ) = max θᵀz over z ∈ Co(D) with μ̂_jᵀz + β·‖z‖_{Σ⁻¹} ≤ τ_j for every row j.

    Raises:
        InfeasibleError: If the pessimistic safe region misses the hull.
        SolverError: On any other non-optimal solve.
    """
    lift, sol = _solve_f(as_vector(theta, geom.dim, name="theta"), geom, decision_set, tau, tol)
    return sol.objective_value, lift.z(sol.point).copy()


def _vertex_solve(vertex, geom, decision_set, tau, tol) -> tuple[HullLift, ConicSolution] | None:
    try:
        return _solve_f(vertex, geom, decision_set, tau, tol)
    except InfeasibleError:
        return None


def _safe_fallback(geom: ConfidenceGeometry, decision_set: DecisionSet, solves: int) -> StepOutcome:
    x0 = decision_set.safe_action
    return StepOutcome(
        policy=Policy.deterministic(x0),
        z_star=x0.copy(),
        branch=Branch.SAFE_FALLBACK,
        objective_value=float(geom.theta_hat @ x0),
        subproblem_solves=solves,
    )


def l1_oplb_step(
    geom: ConfidenceGeometry,
    decision_set: DecisionSet,
    tau: np.ndarray,
    tol: SolverTolerances | None = None,
    executor: Executor | None = None,
) -> StepOutcome:
    """
    One ℓ1 optimistic-pessimistic step.

    f is convex in θ, so its maximum over the ℓ1 confidence polytope sits at one of the 2d vertices. Every
    vertex is solved, the best value wins (the lowest vertex index on ties) and its hull decomposition
    becomes the policy. When every vertex subproblem is infeasible the safe action is played.

    Args:
        geom (ConfidenceGeometry): This round's confidence sets.
        decision_set (DecisionSet): The action set.
        tau (np.ndarray): Thresholds.
        tol (SolverTolerances | None): Solver tolerances.
        executor (Executor | None): Runs the vertex solves concurrently when given.

    Returns:
        StepOutcome: Branch L1 or SafeFallback.
    """
    tau = as_vector(tau, geom.num_constraints, name="tau")
    vertices = l1_vertices(geom)
    solve = partial(_vertex_solve, geom=geom, decision_set=decision_set, tau=tau, tol=tol)
    results = list(executor.map(solve, vertices)) if executor is not None else [solve(v) for v in vertices]

    best: tuple[int, HullLift, ConicSolution] | None = None
    for i, result in enumerate(results):
        if result is None:
            continue
        lift, sol = result
        if best is None or sol.objective_value > best[2].objective_value + _TIE_TOL * (
            1.0 + abs(best[2].objective_value)
        ):
            best = (i, lift, sol)

    if best is None:
        logger.debug("all vertex subproblems infeasible, playing the safe action")
        return _safe_fallback(geom, decision_set, len(vertices))

    index, lift, sol = best
    mixture = extract_mixture(lift, sol, decision_set=decision_set)
    policy = Policy.from_mixture(mixture)
    logger.debug(f"l1 step: vertex {index} of {len(vertices)}, value {sol.objective_value:.6f}")
    return StepOutcome(
        policy=policy,
        z_star=policy.mean.copy(),
        branch=Branch.L1,
        objective_value=sol.objective_value,
        subproblem_solves=len(vertices),
    )


def ubm_step(
    geom: ConfidenceGeometry,
    decision_set: DecisionSet,
    tau: np.ndarray,
    activity_tol: float | None = None,
    tol: SolverTolerances | None = None,
    executor: Executor | None = None,
) -> StepOutcome:
    """
    One upper-bound-maximization step.

    The nonconcave objective θ̂ᵀz + ρ·β·‖z‖_{Σ⁻¹} is replaced by the linear upper bound
    θ̂ᵀz + min_j ρ·(τ_j − μ̂_jᵀz), which is valid on the pessimistic safe set. Its maximizer is
    exact when the tightest pessimistic row is active there; otherwise the step falls back to
    `l1_oplb_step`.
    """
    tau = as_vector(tau, geom.num_constraints, name="tau")
    activity_tol = default_activity_tol(tau) if activity_tol is None else activity_tol

    epigraph = [(-geom.rho * geom.mu_hat[j], geom.rho * float(tau[j])) for j in range(geom.num_constraints)]
    cuts = pessimistic_soc_cuts(geom, tau)
    lift = hull_lift(decision_set, geom.theta_hat, extra_soc=cuts, epigraph=epigraph)
    sol = solve_conic(lift.program, tol)
    if sol.status in (SolverStatus.INFEASIBLE, SolverStatus.NUMERICAL_FAILURE):
        logger.debug(f"upper-bound program ended with {sol.status.value}, solving the l1 program")
        fallback = l1_oplb_step(geom, decision_set, tau, tol, executor)
        fallback.subproblem_solves += 1
        return fallback
    _checked(sol, "upper-bound program")

    z = lift.z(sol.point)
    slack = min(float(tau[j]) - pessimistic_cost_bound(geom, z, j) for j in range(geom.num_constraints))
    if slack > activity_tol:
        logger.debug(f"ubm slack {slack:.3e} above {activity_tol:.1e}, solving the l1 program")
        fallback = l1_oplb_step(geom, decision_set, tau, tol, executor)
        fallback.subproblem_solves += 1
        return fallback

    policy = Policy.from_mixture(extract_mixture(lift, sol, decision_set=decision_set))
    return StepOutcome(
        policy=policy,
        z_star=policy.mean.copy(),
        branch=Branch.UBM_EXACT,
        objective_value=float(geom.theta_hat @ policy.mean + optimistic_bonus(geom, policy.mean)),
        subproblem_solves=1,
    )


def reduce_support(
    points: Sequence[np.ndarray],
    weights: Sequence[float],
    theta: np.ndarray,
    gamma: np.ndarray,
    tau: np.ndarray,
) -> Policy:
    """
    Shrink a feasible mixture to at most m + 1 points without lowering θᵀ·mean.

    The weights are a feasible point of {(w, s) ≥ 0 : Γ·Z·w + s = τ, 1ᵀw = 1}, an LP in standard form
    with m + 1 rows; purification moves them to a basic solution.

    Raises:
        PolicyError: If the mixture mean violates Γ·mean ≤ τ.
    """
    Z = np.column_stack([as_vector(p) for p in points])
    w = as_vector(weights, Z.shape[1], name="weights")
    gamma = as_matrix(gamma, cols=Z.shape[0], name="gamma")
    tau = as_vector(tau, gamma.shape[0], name="tau")
    theta = as_vector(theta, Z.shape[0], name="theta")
    m, k = gamma.shape[0], Z.shape[1]

    slack = tau - gamma @ Z @ w
    if np.min(slack) < -_SLACK_TOL * (1.0 + np.max(np.abs(tau))):
        raise PolicyError(f"mixture violates the linear constraints by {-np.min(slack):.3e}")
    start = np.concatenate([w, np.clip(slack, 0.0, None)])

    A = np.block([[gamma @ Z, np.eye(m)], [np.ones((1, k)), np.zeros((1, m))]])
    b = A @ start
    c = np.concatenate([theta @ Z, np.zeros(m)])
    reduced = purify_to_bfs(A, b, c, start)[:k]

    keep = np.flatnonzero(reduced > 0)
    logger.debug(f"support reduced from {k} to {keep.size} points")
    return Policy.from_mixture([(Z[:, i], float(reduced[i])) for i in keep])


def oracle_policy(
    theta: np.ndarray,
    gamma: np.ndarray,
    tau: np.ndarray,
    decision_set: DecisionSet,
    tol: SolverTolerances | None = None,
) -> Policy:
    """
    The omniscient optimal feasible policy: max θᵀz over z ∈ Co(D) with Γz ≤ τ, supported on at most
    m + 1 points.

    Raises:
        InfeasibleError: If the safe action already violates Γx₀ ≤ τ.
    """
    d = decision_set.ambient_dim
    theta = as_vector(theta, d, name="theta")
    gamma = as_matrix(gamma, cols=d, name="gamma")
    tau = as_vector(tau, gamma.shape[0], name="tau")
    if np.any(gamma @ decision_set.safe_action > tau):
        raise InfeasibleError(f"safe action costs {gamma @ decision_set.safe_action} exceed thresholds {tau}")

    lift = hull_lift(decision_set, theta, extra_linear=[(row, float(t)) for row, t in zip(gamma, tau)])
    sol = _checked(solve_conic(lift.program, tol), "optimal policy program")
    mixture = extract_mixture(lift, sol, decision_set=decision_set)
    points, weights = zip(*mixture)
    return reduce_support(points, weights, theta, gamma, tau)
