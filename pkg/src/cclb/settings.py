# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

import os
from typing import Literal

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


def _default_workers() -> int:
    cpus = os.cpu_count() or 1
    return cpus - 1 if cpus >= 2 else 1


class SolverTolerances(BaseSettings):
    """
    Tolerances handed to the conic solver.

    Attributes:
        feas (float): Primal/dual feasibility tolerance (ε_feas).
        gap (float): Relative duality-gap tolerance (ε_gap).
        max_iter (int): Interior-point iteration cap.
        unbounded_threshold (float): Objective magnitude treated as divergence.
        residual_ceiling (float): Largest accepted constraint residual after a solve,
            scaled by 1 + ‖b‖∞.
        backend (str): "clarabel" (direct standard form) or "cvxpy" (modelling layer over Clarabel).
    """

    model_config = SettingsConfigDict(env_prefix="CCLB_SOLVER_", frozen=True)

    feas: float = Field(default=1e-8, gt=0)
    gap: float = Field(default=1e-8, gt=0)
    max_iter: int = Field(default=200, ge=1)
    unbounded_threshold: float = Field(default=1e12, gt=0)
    residual_ceiling: float = Field(default=1e-6, gt=0)
    backend: Literal["clarabel", "cvxpy"] = "clarabel"


class RuntimeSettings(BaseSettings):
    model_config = SettingsConfigDict(env_prefix="CCLB_")

    log_level: str = "INFO"
    max_workers: int = Field(default_factory=_default_workers, ge=1)
    cache_oracle: bool = True
