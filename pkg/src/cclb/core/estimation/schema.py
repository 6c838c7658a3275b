# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from cclb.core.exception import DimensionError, PolicyError
from cclb.util import as_matrix, as_vector


class ConfidenceState(BaseModel):
    """
    ConfidenceState holds the regularized least-squares statistics of the rounds played so far.

    Σ = λI + Σ x_i·x_iᵀ, b_r = Σ r_i·x_i and row j of B_c = Σ c_{i,j}·x_i. Estimates are recovered
    as θ̂ = Σ⁻¹·b_r and μ̂_j = Σ⁻¹·B_c[j]. The state is a value: `update` returns a new
    instance.

    Attributes:
        dim (int): Action dimension d.
        num_constraints (int): Number of cost rows m.
        regularization (float): λ.
        gram (np.ndarray): Σ, d×d.
        reward_moment (np.ndarray): b_r, length d.
        cost_moments (np.ndarray): B_c, m×d.
        t (int): Round counter, 1 before any data.
        noise_scale (float): Sub-Gaussian scale R.
        param_bound (float): S, with ‖θ*‖ ≤ S (and ‖μ_j‖ ≤ S², unused by the algorithms).
        norm_bound (float): L, with ‖x‖ ≤ L on the decision set.
        delta (float): Failure probability δ.
        tau (np.ndarray): Thresholds τ, length m.
        safe_cost (np.ndarray): c₀, the known cost of the safe action, length m.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    dim: int = Field(ge=1)
    num_constraints: int = Field(ge=1)
    regularization: float = Field(gt=0)
    gram: np.ndarray
    reward_moment: np.ndarray
    cost_moments: np.ndarray
    t: int = Field(default=1, ge=1)
    noise_scale: float = Field(ge=0)
    param_bound: float = Field(ge=0)
    norm_bound: float = Field(gt=0)
    delta: float = Field(gt=0, lt=1)
    tau: np.ndarray
    safe_cost: np.ndarray

    @field_validator("gram", "cost_moments", mode="before")
    @classmethod
    def _as_matrix(cls, value):
        return as_matrix(value)

    @field_validator("reward_moment", "tau", "safe_cost", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return as_vector(value)

    @model_validator(mode="after")
    def _check_shapes(self):
        d, m = self.dim, self.num_constraints
        if self.gram.shape != (d, d):
            raise DimensionError(f"gram is {self.gram.shape}, expected {(d, d)}")
        if self.reward_moment.shape != (d,):
            raise DimensionError(f"reward moment has shape {self.reward_moment.shape}, expected {(d,)}")
        if self.cost_moments.shape != (m, d):
            raise DimensionError(f"cost moments are {self.cost_moments.shape}, expected {(m, d)}")
        if self.tau.shape != (m,) or self.safe_cost.shape != (m,):
            raise DimensionError(f"tau and safe cost need {m} entries")
        return self

    @classmethod
    def fresh(
        cls,
        dim: int,
        tau: np.ndarray,
        regularization: float,
        noise_scale: float,
        param_bound: float,
        norm_bound: float,
        delta: float,
        safe_cost: np.ndarray | None = None,
    ) -> "ConfidenceState":
        tau = as_vector(tau, name="tau")
        m = tau.shape[0]
        return cls(
            dim=dim,
            num_constraints=m,
            regularization=regularization,
            gram=regularization * np.eye(dim),
            reward_moment=np.zeros(dim),
            cost_moments=np.zeros((m, dim)),
            noise_scale=noise_scale,
            param_bound=param_bound,
            norm_bound=norm_bound,
            delta=delta,
            tau=tau,
            safe_cost=np.zeros(m) if safe_cost is None else safe_cost,
        )

    @property
    def theta_hat(self) -> np.ndarray:
        return np.linalg.solve(self.gram, self.reward_moment)

    @property
    def mu_hat(self) -> np.ndarray:
        return np.linalg.solve(self.gram, self.cost_moments.T).T


class ConfidenceGeometry(BaseModel):
    """
    ConfidenceGeometry is the read-only view of one round's confidence sets.

    `gram_inv_sqrt` is the principal inverse square root Σ^{-1/2}, taken from an eigendecomposition.
    With `literal_gram_norm` the cost bounds use √(zᵀΣz) instead of the dual norm √(zᵀΣ⁻¹z).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    theta_hat: np.ndarray
    mu_hat: np.ndarray
    beta: float = Field(gt=0)
    rho: float = Field(ge=1)
    gram: np.ndarray
    gram_inv: np.ndarray
    gram_inv_sqrt: np.ndarray
    literal_gram_norm: bool = False

    @field_validator("theta_hat", mode="before")
    @classmethod
    def _as_vector(cls, value):
        return as_vector(value, name="theta_hat")

    @field_validator("mu_hat", "gram", "gram_inv", "gram_inv_sqrt", mode="before")
    @classmethod
    def _as_matrix(cls, value):
        return as_matrix(value)

    @model_validator(mode="after")
    def _check_geometry(self):
        d = self.theta_hat.shape[0]
        for name in ("gram", "gram_inv", "gram_inv_sqrt"):
            if getattr(self, name).shape != (d, d):
                raise DimensionError(f"{name} is {getattr(self, name).shape}, expected {(d, d)}")
        if self.mu_hat.shape[1] != d:
            raise DimensionError(f"mu_hat has {self.mu_hat.shape[1]} columns, expected {d}")
        if not np.allclose(self.gram_inv @ self.gram, np.eye(d), atol=1e-8):
            raise PolicyError("gram_inv is not the inverse of gram")
        return self

    @classmethod
    def from_parts(
        cls,
        theta_hat: np.ndarray,
        mu_hat: np.ndarray,
        beta: float,
        rho: float,
        gram: np.ndarray,
        literal_gram_norm: bool = False,
    ) -> "ConfidenceGeometry":
        gram = as_matrix(gram, name="gram")
        eigvals, eigvecs = np.linalg.eigh(gram)
        if eigvals.min() <= 0:
            raise PolicyError(f"gram must be positive definite, smallest eigenvalue {eigvals.min():.3e}")
        return cls(
            theta_hat=theta_hat,
            mu_hat=mu_hat,
            beta=beta,
            rho=rho,
            gram=gram,
            gram_inv=(eigvecs / eigvals) @ eigvecs.T,
            gram_inv_sqrt=(eigvecs / np.sqrt(eigvals)) @ eigvecs.T,
            literal_gram_norm=literal_gram_norm,
        )

    @property
    def dim(self) -> int:
        return self.theta_hat.shape[0]

    @property
    def num_constraints(self) -> int:
        return self.mu_hat.shape[0]

    @property
    def norm_factor(self) -> np.ndarray:
        """M with ‖M·z‖₂ equal to the norm used by the cost bounds."""
        if self.literal_gram_norm:
            return np.linalg.inv(self.gram_inv_sqrt)
        return self.gram_inv_sqrt

    def confidence_norm(self, z: np.ndarray) -> float:
        return float(np.linalg.norm(self.norm_factor @ z))
