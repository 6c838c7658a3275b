# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from .estimator import (
    beta,
    geometry,
    l1_vertices,
    optimistic_bonus,
    pessimistic_cost_bound,
    pessimistic_soc_cuts,
    rho,
    update,
)
from .schema import ConfidenceGeometry, ConfidenceState

__all__ = [
    "ConfidenceGeometry",
    "ConfidenceState",
    "beta",
    "geometry",
    "l1_vertices",
    "optimistic_bonus",
    "pessimistic_cost_bound",
    "pessimistic_soc_cuts",
    "rho",
    "update",
]
