# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

import math

import numpy as np
from loguru import logger

from cclb.core.estimation.schema import ConfidenceGeometry, ConfidenceState
from cclb.core.exception import InfeasibleError
from cclb.util import as_vector

_NORM_SLACK = 1e-6


def update(state: ConfidenceState, x: np.ndarray, r: float, c: np.ndarray) -> ConfidenceState:
    """
    Fold one observation (x, r, c) into the statistics.

    Args:
        state (ConfidenceState): Current state.
        x (np.ndarray): Played action, length d.
        r (float): Observed reward.
        c (np.ndarray): Observed costs, length m.

    Returns:
        ConfidenceState: The state for the next round.
    """
    x = as_vector(x, state.dim, name="action")
    c = as_vector(c, state.num_constraints, name="cost")
    if np.linalg.norm(x) > state.norm_bound + _NORM_SLACK:
        logger.warning(f"action norm {np.linalg.norm(x):.4f} exceeds L = {state.norm_bound:.4f}")
    return state.model_copy(
        update={
            "gram": state.gram + np.outer(x, x),
            "reward_moment": state.reward_moment + r * x,
            "cost_moments": state.cost_moments + np.outer(c, x),
            "t": state.t + 1,
        }
    )


def beta(state: ConfidenceState) -> float:
    """β_t = R·√(d·log((1 + (t−1)·L²/λ)/δ)) + √λ·S."""
    growth = 1.0 + (state.t - 1) * state.norm_bound**2 / state.regularization
    log_term = max(math.log(growth / state.delta), 0.0)
    width = state.noise_scale * math.sqrt(state.dim * log_term)
    return width + math.sqrt(state.regularization) * state.param_bound


def rho(tau: float | np.ndarray, safe_cost: float | np.ndarray = 0.0) -> float:
    """
    Optimism inflation ρ = 1 + 2/(τ − c₀); with several rows the largest value is taken.

    Raises:
        InfeasibleError: If some τ_j ≤ c₀_j, i.e. the safe action is not strictly feasible.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    c0 = np.broadcast_to(np.asarray(safe_cost, dtype=float), tau.shape)
    gap = tau - c0
    if np.any(gap <= 0):
        raise InfeasibleError(f"thresholds {tau} do not exceed the safe cost {c0}")
    return float(np.max(1.0 + 2.0 / gap))


def geometry(state: ConfidenceState, literal_gram_norm: bool = False) -> ConfidenceGeometry:
    return ConfidenceGeometry.from_parts(
        theta_hat=state.theta_hat,
        mu_hat=state.mu_hat,
        beta=beta(state),
        rho=rho(state.tau, state.safe_cost),
        gram=state.gram,
        literal_gram_norm=literal_gram_norm,
    )


def l1_vertices(geom: ConfidenceGeometry) -> list[np.ndarray]:
    """
    The 2d vertices θ̂ ± ρ·√d·β·Σ^{-1/2}·e_j of the ℓ1 confidence polytope.

    Ordered (+e_0, −e_0, +e_1, −e_1, …); the order is the tie-break order of the vertex search.
    """
    radius = geom.rho * math.sqrt(geom.dim) * geom.beta
    vertices = []
    for j in range(geom.dim):
        step = radius * geom.gram_inv_sqrt[:, j]
        vertices.append(geom.theta_hat + step)
        vertices.append(geom.theta_hat - step)
    return vertices


def pessimistic_cost_bound(geom: ConfidenceGeometry, z: np.ndarray, row: int = 0) -> float:
    """max μᵀz over the ℓ2 confidence set of row `row`: μ̂_rowᵀz + β·‖z‖_{Σ⁻¹}."""
    z = as_vector(z, geom.dim, name="z")
    return float(geom.mu_hat[row] @ z + geom.beta * geom.confidence_norm(z))


def optimistic_bonus(geom: ConfidenceGeometry, z: np.ndarray) -> float:
    """ρ·β·‖z‖_{Σ⁻¹}, the optimism added to θ̂ᵀz by the ℓ2 reward set inflated by ρ."""
    z = as_vector(z, geom.dim, name="z")
    return geom.rho * geom.beta * geom.confidence_norm(z)


def pessimistic_soc_cuts(
    geom: ConfidenceGeometry, tau: np.ndarray
) -> list[tuple[np.ndarray, np.ndarray, float]]:
    """One cut ‖β·M·z‖ + μ̂_jᵀz ≤ τ_j per constraint row, in hull_lift's extra_soc form."""
    tau = as_vector(tau, geom.num_constraints, name="tau")
    M = geom.beta * geom.norm_factor
    return [(M, geom.mu_hat[j], float(tau[j])) for j in range(geom.num_constraints)]
