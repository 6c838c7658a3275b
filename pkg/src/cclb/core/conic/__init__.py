# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from .purify import purify_to_bfs
from .schema import Cone, ConeKind, ConicConstraint, ConicProgram, ConicSolution, SolverStatus
from .solver import solve_conic

__all__ = [
    "Cone",
    "ConeKind",
    "ConicConstraint",
    "ConicProgram",
    "ConicSolution",
    "SolverStatus",
    "purify_to_bfs",
    "solve_conic",
]
