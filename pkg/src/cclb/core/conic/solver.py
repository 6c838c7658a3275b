# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

import clarabel
import cvxpy as cp
import numpy as np
from loguru import logger
from scipy import sparse

from cclb.core.conic.schema import ConeKind, ConicProgram, ConicSolution, SolverStatus
from cclb.settings import SolverTolerances

_DEFAULT_TOLERANCES = SolverTolerances()

_CLARABEL_STATUS = {
    "Solved": SolverStatus.OPTIMAL,
    "AlmostSolved": SolverStatus.OPTIMAL,
    "PrimalInfeasible": SolverStatus.INFEASIBLE,
    "AlmostPrimalInfeasible": SolverStatus.INFEASIBLE,
    "DualInfeasible": SolverStatus.UNBOUNDED,
    "AlmostDualInfeasible": SolverStatus.UNBOUNDED,
}

_CVXPY_STATUS = {
    cp.OPTIMAL: SolverStatus.OPTIMAL,
    cp.OPTIMAL_INACCURATE: SolverStatus.OPTIMAL,
    cp.INFEASIBLE: SolverStatus.INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: SolverStatus.INFEASIBLE,
    cp.UNBOUNDED: SolverStatus.UNBOUNDED,
    cp.UNBOUNDED_INACCURATE: SolverStatus.UNBOUNDED,
}


def _clarabel_status_name(status) -> str:
    for name in (
        "Solved",
        "AlmostSolved",
        "PrimalInfeasible",
        "AlmostPrimalInfeasible",
        "DualInfeasible",
        "AlmostDualInfeasible",
    ):
        if status == getattr(clarabel.SolverStatus, name, None):
            return name
    return str(status)


def _clarabel_cone(kind: ConeKind, dim: int):
    if kind is ConeKind.NONNEGATIVE:
        return clarabel.NonnegativeConeT(dim)
    if kind is ConeKind.ZERO:
        return clarabel.ZeroConeT(dim)
    return clarabel.SecondOrderConeT(dim)


def _solve_clarabel(prog: ConicProgram, tol: SolverTolerances) -> tuple[str, np.ndarray | None, int]:
    # Clarabel form: minimize qᵀx s.t. A_cl·x + s = b_cl, s ∈ K, so A_cl = −A and q = −c.
    A = sparse.csc_matrix(-np.vstack([con.A for con in prog.constraints]))
    b = np.concatenate([con.b for con in prog.constraints])
    cones = [_clarabel_cone(con.cone.kind, con.cone.dim) for con in prog.constraints]
    P = sparse.csc_matrix((prog.num_vars, prog.num_vars))

    settings = clarabel.DefaultSettings()
    settings.verbose = False
    settings.max_iter = tol.max_iter
    settings.tol_feas = tol.feas
    settings.tol_gap_rel = tol.gap
    settings.tol_gap_abs = tol.gap

    solution = clarabel.DefaultSolver(P, -prog.objective, A, b, cones, settings).solve()
    name = _clarabel_status_name(solution.status)
    point = np.asarray(solution.x, dtype=float) if name in ("Solved", "AlmostSolved") else None
    if name == "AlmostSolved":
        logger.warning("Clarabel reported AlmostSolved; accepting after residual check")
    return name, point, int(solution.iterations)


def _solve_cvxpy(prog: ConicProgram, tol: SolverTolerances) -> tuple[str, np.ndarray | None, int]:
    x = cp.Variable(prog.num_vars)
    constraints = []
    for con in prog.constraints:
        expr = con.A @ x + con.b
        if con.cone.kind is ConeKind.NONNEGATIVE:
            constraints.append(expr >= 0)
        elif con.cone.kind is ConeKind.ZERO:
            constraints.append(expr == 0)
        else:
            constraints.append(cp.SOC(expr[0], expr[1:]))
    problem = cp.Problem(cp.Maximize(prog.objective @ x), constraints)
    try:
        problem.solve(
            solver=cp.CLARABEL,
            max_iter=tol.max_iter,
            tol_feas=tol.feas,
            tol_gap_rel=tol.gap,
            tol_gap_abs=tol.gap,
        )
    except cp.SolverError as e:
        logger.debug(f"cvxpy solver error: {e}")
        return "NumericalError", None, 0
    status = problem.status
    iterations = int(problem.solver_stats.num_iters or 0) if problem.solver_stats else 0
    point = np.asarray(x.value, dtype=float) if x.value is not None else None
    if status not in _CVXPY_STATUS:
        return str(status), None, iterations
    return _CVXPY_STATUS[status].value, point, iterations


def solve_conic(prog: ConicProgram, tol: SolverTolerances | None = None) -> ConicSolution:
    """
    Maximize cᵀx subject to A_k·x + b_k ∈ K_k.

    The status is reported, never raised: Infeasible and Unbounded come from solver certificates,
    NumericalFailure from iteration limits or a point whose residuals exceed the ceiling.

    Args:
        prog (ConicProgram): The program to solve.
        tol (SolverTolerances | None): Tolerances; defaults are read from the environment.

    Returns:
        ConicSolution: Status, and the primal point and objective value when Optimal.
    """
    tol = tol or _DEFAULT_TOLERANCES

    if not prog.constraints:
        if np.allclose(prog.objective, 0.0):
            return ConicSolution(
                status=SolverStatus.OPTIMAL,
                point=np.zeros(prog.num_vars),
                objective_value=0.0,
                max_residual=0.0,
            )
        return ConicSolution(status=SolverStatus.UNBOUNDED)

    if tol.backend == "cvxpy":
        name, point, iterations = _solve_cvxpy(prog, tol)
        try:
            status = SolverStatus(name)
        except ValueError:
            status = None
    else:
        name, point, iterations = _solve_clarabel(prog, tol)
        status = _CLARABEL_STATUS.get(name)

    if status is None:
        logger.debug(f"solver stopped with {name} after {iterations} iterations")
        return ConicSolution(status=SolverStatus.NUMERICAL_FAILURE, iterations=iterations)
    if status is not SolverStatus.OPTIMAL:
        return ConicSolution(status=status, iterations=iterations)
    if point is None or not np.all(np.isfinite(point)):
        return ConicSolution(status=SolverStatus.NUMERICAL_FAILURE, iterations=iterations)

    value = float(prog.objective @ point)
    if abs(value) > tol.unbounded_threshold:
        return ConicSolution(status=SolverStatus.UNBOUNDED, iterations=iterations)

    residual = prog.max_violation(point)
    if residual > tol.residual_ceiling * (1.0 + prog.rhs_scale()):
        logger.debug(f"rejecting solver point with residual {residual:.3e}")
        return ConicSolution(status=SolverStatus.NUMERICAL_FAILURE, iterations=iterations)

    return ConicSolution(
        status=SolverStatus.OPTIMAL,
        point=point,
        objective_value=value,
        max_residual=residual,
        iterations=iterations,
    )
