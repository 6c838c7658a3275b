# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from .decision_set import (
    CONTAINS_TOL,
    EPS_ALPHA,
    DecisionSet,
    ball_piece,
    box_piece,
    ellipsoid_piece,
    extract_mixture,
    hull_lift,
    point_piece,
    polytope_piece,
)
from .schema import ConicPiece, HullLift

__all__ = [
    "CONTAINS_TOL",
    "EPS_ALPHA",
    "ConicPiece",
    "DecisionSet",
    "HullLift",
    "ball_piece",
    "box_piece",
    "ellipsoid_piece",
    "extract_mixture",
    "hull_lift",
    "point_piece",
    "polytope_piece",
]
