# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from .engine import (
    default_activity_tol,
    evaluate_f,
    l1_oplb_step,
    oracle_policy,
    reduce_support,
    ubm_step,
)
from .schema import Branch, Policy, StepOutcome

__all__ = [
    "Branch",
    "Policy",
    "StepOutcome",
    "default_activity_tol",
    "evaluate_f",
    "l1_oplb_step",
    "oracle_policy",
    "reduce_support",
    "ubm_step",
]
