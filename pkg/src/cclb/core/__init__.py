# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT


from cclb.core.exception import (
    ConfigError,
    ConicError,
    DecisionSetError,
    DimensionError,
    InfeasibleError,
    PolicyError,
    PurificationError,
    SolverError,
)

__all__ = [
    "ConfigError",
    "ConicError",
    "DecisionSetError",
    "DimensionError",
    "InfeasibleError",
    "PolicyError",
    "PurificationError",
    "SolverError",
]
