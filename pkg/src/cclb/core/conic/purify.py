# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

import numpy as np
from loguru import logger
from scipy.linalg import null_space

from cclb.core.exception import PurificationError
from cclb.util import as_matrix, as_vector

_ZERO = 1e-12
_RCOND = 1e-10


def _check_preconditions(A: np.ndarray, b: np.ndarray, w: np.ndarray, feas: float):
    p, q = A.shape
    if b.shape[0] != p or w.shape[0] != q:
        raise PurificationError(f"shapes disagree: A is {p}x{q}, b has {b.shape[0]}, w has {w.shape[0]}")
    if p > q:
        raise PurificationError(f"A must be fat (p <= q), got {p}x{q}")
    if np.linalg.matrix_rank(A) < p:
        raise PurificationError("A must have full row rank")
    scale = 1.0 + float(np.max(np.abs(b), initial=0.0))
    if np.min(w, initial=0.0) < -feas * scale:
        raise PurificationError(f"weights must be nonnegative, min is {np.min(w):.3e}")
    residual = float(np.max(np.abs(A @ w - b), initial=0.0))
    if residual > feas * scale:
        raise PurificationError(f"A·w = b violated by {residual:.3e}")


def purify_to_bfs(
    equality_A: np.ndarray,
    equality_b: np.ndarray,
    objective_c: np.ndarray,
    feasible_weights: np.ndarray,
    feas: float = 1e-8,
) -> np.ndarray:
    """
    Move a feasible point of {w : A·w = b, w ≥ 0} to a basic feasible solution without lowering cᵀw.

    While the columns of A on the support of w are linearly dependent, mass is pushed along a null-space
    direction v of those columns, oriented so that cᵀv ≥ 0, until a weight hits zero. When several weights
    block at the same step the smallest index is dropped. The result has at most p nonzero entries.

    Args:
        equality_A (np.ndarray): p×q matrix of full row rank.
        equality_b (np.ndarray): Right-hand side of length p.
        objective_c (np.ndarray): Objective of length q (maximized).
        feasible_weights (np.ndarray): Feasible starting point w.
        feas (float): Feasibility tolerance for the precondition check.

    Returns:
        np.ndarray: The purified weights w'.
    """
    A = as_matrix(equality_A, name="equality_A")
    b = as_vector(equality_b, A.shape[0], name="equality_b")
    c = as_vector(objective_c, A.shape[1], name="objective_c")
    w = as_vector(feasible_weights, A.shape[1], name="feasible_weights").copy()
    _check_preconditions(A, b, w, feas)

    w[w < _ZERO] = 0.0
    p = A.shape[0]
    for _ in range(A.shape[1] + 1):
        active = np.flatnonzero(w > _ZERO)
        basis = null_space(A[:, active], rcond=_RCOND)
        if basis.shape[1] == 0:
            break

        v = basis[:, 0]
        gain = float(c[active] @ v)
        if gain < 0 or (abs(gain) <= _ZERO and not np.any(v < -_ZERO)):
            v = -v
        if not np.any(v < -_ZERO):
            raise PurificationError("feasible region is unbounded along a non-worsening direction")

        shrinking = v < -_ZERO
        ratios = np.full(active.shape[0], np.inf)
        ratios[shrinking] = w[active][shrinking] / -v[shrinking]
        step = float(np.min(ratios))
        blocking = active[np.flatnonzero(ratios <= step + _ZERO)]

        w[active] = w[active] + step * v
        w[blocking.min()] = 0.0
        w[w < _ZERO] = 0.0
    else:
        raise PurificationError("purification did not terminate")

    # Active columns are independent now; re-solve them exactly against b.
    active = np.flatnonzero(w > 0)
    if active.size:
        refined, *_ = np.linalg.lstsq(A[:, active], b, rcond=None)
        if np.all(refined >= -_ZERO):
            w[active] = np.clip(refined, 0.0, None)

    if active.size > p:
        raise PurificationError(f"support {active.size} exceeds {p}")
    logger.debug(f"purified support to {active.size} of {A.shape[1]} weights")
    return w
