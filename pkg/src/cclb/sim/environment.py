# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

import numpy as np

from cclb.core.policy import Policy
from cclb.sim.schema import INCREMENT_FLOOR, Environment
from cclb.util import as_vector

VIOLATION_TOL = 1e-9


def sample_action(policy: Policy, rng: np.random.Generator) -> np.ndarray:
    """Draw support point i with probability weight_i."""
    index = rng.choice(len(policy.support), p=policy.weights)
    return policy.support[index][0].copy()


def observe(env: Environment, x: np.ndarray, rng: np.random.Generator) -> tuple[float, np.ndarray]:
    x = as_vector(x, env.dim, name="action")
    r = float(env.theta_star @ x + env.noise_scale * rng.standard_normal())
    c = env.gamma_star @ x + env.noise_scale * rng.standard_normal(env.num_constraints)
    return r, c


def regret_increment(env: Environment, optimal_mean: np.ndarray, policy: Policy) -> float:
    """θ*ᵀ(optimal mean) − θ*ᵀ(policy mean), floored at −1e−9."""
    gap = float(env.theta_star @ optimal_mean - env.theta_star @ policy.mean)
    return max(gap, INCREMENT_FLOOR)


def expected_cost(env: Environment, policy: Policy) -> np.ndarray:
    return env.gamma_star @ policy.mean


def violation_check(env: Environment, policy: Policy) -> bool:
    return bool(np.any(expected_cost(env, policy) > env.tau + VIOLATION_TOL))
