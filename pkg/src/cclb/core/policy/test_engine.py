import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest
from scipy.optimize import linprog

from cclb.core.conic import ConicSolution, SolverStatus, solve_conic
from cclb.core.decision import DecisionSet, ball_piece, box_piece, point_piece
from cclb.core.estimation import ConfidenceGeometry, l1_vertices, pessimistic_cost_bound
from cclb.core.exception import InfeasibleError, PolicyError
from cclb.core.policy import engine
from cclb.core.policy import (
    Branch,
    Policy,
    evaluate_f,
    l1_oplb_step,
    oracle_policy,
    reduce_support,
    ubm_step,
)
from cclb.settings import SolverTolerances

TIGHT = SolverTolerances(feas=1e-10, gap=1e-10)


@pytest.fixture
def unit_disk():
    return DecisionSet(pieces=[ball_piece([0.0, 0.0], 1.0)], ambient_dim=2, safe_action=[0.0, 0.0])


@pytest.fixture
def two_intervals():
    return DecisionSet(
        pieces=[box_piece([-3.0], [-1.0]), box_piece([1.0], [3.0])],
        ambient_dim=1,
        safe_action=[1.0],
    )


def _geom(theta_hat, mu_hat, beta, rho, gram):
    return ConfidenceGeometry.from_parts(
        theta_hat=np.atleast_1d(np.asarray(theta_hat, dtype=float)),
        mu_hat=np.atleast_2d(np.asarray(mu_hat, dtype=float)),
        beta=beta,
        rho=rho,
        gram=np.atleast_2d(np.asarray(gram, dtype=float)),
    )


def _l2_ray_oracle(geom, tau, samples=200_000):
    """
    Max of θ̂ᵀz + ρ·β·‖z‖ over the unit disk intersected with the pessimistic safe region.

    The region is convex and contains the origin, so its boundary is traced by rays from the origin; the
    convex objective peaks on that boundary.
    """
    angles = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    u = np.column_stack([np.cos(angles), np.sin(angles)])
    norm_u = np.linalg.norm(u @ geom.norm_factor.T, axis=1)
    radius = np.ones(samples)
    for j, t in enumerate(tau):
        denom = u @ geom.mu_hat[j] + geom.beta * norm_u
        with np.errstate(divide="ignore"):
            radius = np.minimum(radius, np.where(denom > 0, t / denom, np.inf))
    values = radius * (u @ geom.theta_hat + geom.rho * geom.beta * norm_u)
    return float(values.max())


def _assert_safe(outcome, geom, tau):
    if outcome.branch is Branch.SAFE_FALLBACK:
        return
    for j, t in enumerate(tau):
        assert pessimistic_cost_bound(geom, outcome.policy.mean, j) <= t + 1e-6


# oracle policy


def test_oracle_on_unit_disk(unit_disk):
    theta, gamma, tau = np.array([3.0, 2.5]), np.array([[0.5, 0.5]]), np.array([0.5])
    policy = oracle_policy(theta, gamma, tau, unit_disk, TIGHT)
    assert len(policy.support) <= 2
    assert gamma @ policy.mean <= tau + 1e-8

    grid = np.linspace(-1.0, 1.0, 2001)
    z1, z2 = np.meshgrid(grid, grid)
    feasible = (z1**2 + z2**2 <= 1.0) & (0.5 * z1 + 0.5 * z2 <= 0.5)
    best = float(np.max((3.0 * z1 + 2.5 * z2)[feasible]))
    assert theta @ policy.mean == pytest.approx(best, abs=2e-3)
    np.testing.assert_allclose(policy.mean, [1.0, 0.0], atol=1e-4)


def test_oracle_with_vacuous_constraint(unit_disk):
    theta = np.array([3.0, 2.5])
    policy = oracle_policy(theta, np.array([[0.5, 0.5]]), np.array([1e6]), unit_disk, TIGHT)
    assert len(policy.support) == 1
    np.testing.assert_allclose(policy.mean, [0.7682, 0.6402], atol=1e-4)


def test_oracle_on_three_points():
    finite = DecisionSet(
        pieces=[point_piece([0.0, 0.0]), point_piece([1.0, 0.0]), point_piece([0.0, 1.0])],
        ambient_dim=2,
        safe_action=[0.0, 0.0],
    )
    theta, gamma, tau = np.array([1.0, 0.9]), np.array([[1.0, 0.0]]), np.array([0.5])
    policy = oracle_policy(theta, gamma, tau, finite, TIGHT)
    assert len(policy.support) <= 2
    assert theta @ policy.mean == pytest.approx(0.95, abs=1e-6)
    for point, _ in policy.support:
        assert finite.contains(point, 1e-6)


def test_oracle_rejects_unsafe_baseline(unit_disk):
    with pytest.raises(InfeasibleError):
        oracle_policy(np.array([1.0, 0.0]), np.array([[1.0, 0.0]]), np.array([-0.1]), unit_disk)


def _finite_cases(count, seed):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        d = int(rng.integers(1, 5))
        n = int(rng.integers(2, 21))
        m = int(rng.integers(1, min(3, d) + 1))
        points = rng.normal(size=(n, d))
        gamma = rng.normal(size=(m, d))
        tau = gamma @ points[0] + rng.uniform(0.05, 1.0, size=m)
        yield points, gamma, tau, rng.normal(size=d)


def _check_finite_oracle(count, seed):
    for points, gamma, tau, theta in _finite_cases(count, seed):
        dset = DecisionSet(
            pieces=[point_piece(p) for p in points], ambient_dim=points.shape[1], safe_action=points[0]
        )
        policy = oracle_policy(theta, gamma, tau, dset, TIGHT)
        lp = linprog(
            -(points @ theta),
            A_ub=gamma @ points.T,
            b_ub=tau,
            A_eq=np.ones((1, points.shape[0])),
            b_eq=[1.0],
            bounds=(0, None),
            method="highs",
        )
        assert lp.status == 0
        assert theta @ policy.mean == pytest.approx(-lp.fun, abs=1e-6)
        assert len(policy.support) <= gamma.shape[0] + 1


def test_oracle_matches_distribution_lp():
    _check_finite_oracle(30, seed=8)


@pytest.mark.slow
def test_oracle_matches_distribution_lp_full():
    _check_finite_oracle(200, seed=80)


# support reduction


def test_reduce_three_points_to_two():
    points = [np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([0.0, 1.0])]
    weights = [0.2, 0.4, 0.4]
    theta, gamma, tau = np.array([1.0, 0.9]), np.array([[1.0, 0.0]]), np.array([0.5])
    policy = reduce_support(points, weights, theta, gamma, tau)
    assert len(policy.support) <= 2
    assert theta @ policy.mean >= theta @ (0.4 * points[1] + 0.4 * points[2]) - 1e-10
    assert gamma @ policy.mean <= tau + 1e-10


def test_reduce_single_point_is_unchanged():
    point = np.array([0.3, 0.4])
    policy = reduce_support([point], [1.0], np.ones(2), np.array([[1.0, 0.0]]), np.array([1.0]))
    assert len(policy.support) == 1
    np.testing.assert_allclose(policy.mean, [0.3, 0.4])


def test_reduce_equal_reward_points():
    points = [np.array([0.0, 0.0]), np.array([1.0, 0.0]), np.array([2.0, 0.0])]
    theta = np.array([0.0, 1.0])
    policy = reduce_support(points, [1 / 3, 1 / 3, 1 / 3], theta, np.array([[1.0, 0.0]]), np.array([1.5]))
    assert len(policy.support) <= 2
    assert theta @ policy.mean == 0.0
    assert policy.mean[0] <= 1.5 + 1e-10


def test_reduce_rejects_infeasible_mixture():
    with pytest.raises(PolicyError):
        reduce_support([np.array([1.0])], [1.0], np.ones(1), np.array([[1.0]]), np.array([0.5]))


# pessimistic subproblem


def test_evaluate_f_examples(unit_disk):
    fresh = _geom([0.0, 0.0], [[0.0, 0.0]], beta=2.0, rho=5.0, gram=np.eye(2))
    value, _ = evaluate_f(np.zeros(2), fresh, unit_disk, np.array([0.5]), TIGHT)
    assert value == pytest.approx(0.0, abs=1e-8)

    # safe ball radius τ·√λ/β = 0.25
    value, z = evaluate_f(np.array([1.0, 0.0]), fresh, unit_disk, np.array([0.5]), TIGHT)
    assert value == pytest.approx(0.25, abs=1e-6)
    np.testing.assert_allclose(z, [0.25, 0.0], atol=1e-5)

    loose = _geom([0.0, 0.0], [[0.0, 0.0]], beta=0.1, rho=5.0, gram=np.eye(2))
    value, _ = evaluate_f(np.array([1.0, 0.0]), loose, unit_disk, np.array([0.5]), TIGHT)
    assert value == pytest.approx(1.0, abs=1e-6)


def test_evaluate_f_reports_infeasibility():
    ledge = DecisionSet(pieces=[box_piece([1.0], [2.0])], ambient_dim=1, safe_action=[1.0])
    geom = _geom([0.0], [[0.0]], beta=2.0, rho=5.0, gram=[[1.0]])
    with pytest.raises(InfeasibleError):
        evaluate_f(np.array([1.0]), geom, ledge, np.array([0.5]))


# l1 step


def test_l1_step_solves_every_vertex(unit_disk):
    geom = _geom([0.0, 0.0], [[0.0, 0.0]], beta=2.0, rho=5.0, gram=np.eye(2))
    outcome = l1_oplb_step(geom, unit_disk, np.array([0.5]), TIGHT)
    assert outcome.subproblem_solves == 4
    assert outcome.branch is Branch.L1

    single, _ = evaluate_f(l1_vertices(geom)[0], geom, unit_disk, np.array([0.5]), TIGHT)
    assert outcome.objective_value == pytest.approx(single, abs=1e-7)
    assert np.linalg.norm(outcome.z_star) == pytest.approx(0.25, abs=1e-5)
    assert np.min(np.abs(outcome.z_star)) == pytest.approx(0.0, abs=1e-5)


def test_l1_step_falls_back_to_safe_action():
    ledge = DecisionSet(pieces=[box_piece([1.0], [2.0])], ambient_dim=1, safe_action=[1.0])
    geom = _geom([0.0], [[0.0]], beta=2.0, rho=5.0, gram=[[1.0]])
    outcome = l1_oplb_step(geom, ledge, np.array([0.5]))
    assert outcome.branch is Branch.SAFE_FALLBACK
    assert outcome.subproblem_solves == 2
    assert len(outcome.policy.support) == 1
    np.testing.assert_allclose(outcome.policy.mean, [1.0])


def test_l1_step_on_finite_set_matches_brute_force():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    finite = DecisionSet(pieces=[point_piece(p) for p in pts], ambient_dim=2, safe_action=[0.0, 0.0])
    geom = _geom([0.5, 0.2], [[0.3, 0.1]], beta=0.2, rho=2.0, gram=np.diag([3.0, 2.0]))
    tau = np.array([0.3])
    outcome = l1_oplb_step(geom, finite, tau, TIGHT)

    # over the weights simplex the pessimistic row is ‖β·M·Pᵀw‖ + (P·μ̂)ᵀw ≤ τ
    # enumerate a fine weight grid
    steps = np.linspace(0.0, 1.0, 801)
    w1, w2 = np.meshgrid(steps, steps)
    w1, w2 = w1.ravel(), w2.ravel()
    inside = w1 + w2 <= 1.0
    Z = np.column_stack([w1[inside], w2[inside]])  # mean = w1·(1,0) + w2·(0,1)
    pess = Z @ geom.mu_hat[0] + geom.beta * np.linalg.norm(Z @ geom.gram_inv_sqrt.T, axis=1)
    safe = Z[pess <= tau[0]]
    best = max(float(np.max(safe @ v)) for v in l1_vertices(geom))
    assert outcome.objective_value == pytest.approx(best, abs=5e-3)
    assert outcome.objective_value >= best - 1e-6


def test_l1_step_with_executor(unit_disk):
    geom = _geom([0.4, -0.2], [[0.2, 0.1]], beta=0.5, rho=3.0, gram=[[2.0, 0.3], [0.3, 1.0]])
    tau = np.array([0.5])
    sequential = l1_oplb_step(geom, unit_disk, tau, TIGHT)
    with ThreadPoolExecutor(max_workers=2) as pool:
        threaded = l1_oplb_step(geom, unit_disk, tau, TIGHT, executor=pool)
    assert threaded.objective_value == pytest.approx(sequential.objective_value, abs=1e-9)
    np.testing.assert_allclose(threaded.z_star, sequential.z_star, atol=1e-9)


def _random_disk_geometry(rng):
    A = rng.normal(size=(2, 2))
    return _geom(
        rng.normal(size=2),
        rng.uniform(-0.4, 0.4, size=(1, 2)),
        beta=float(rng.uniform(0.1, 1.0)),
        rho=float(rng.uniform(1.0, 5.0)),
        gram=A @ A.T + np.eye(2),
    )


def test_l1_value_dominates_l2_program(unit_disk):
    rng = np.random.default_rng(12)
    tau = np.array([0.5])
    for _ in range(10):
        geom = _random_disk_geometry(rng)
        outcome = l1_oplb_step(geom, unit_disk, tau, TIGHT)
        assert outcome.branch is Branch.L1
        assert outcome.objective_value >= _l2_ray_oracle(geom, tau) - 1e-6
        _assert_safe(outcome, geom, tau)
        for point, _ in outcome.policy.support:
            assert unit_disk.contains(point, 1e-6)


def test_inflating_optimism_never_lowers_the_value(unit_disk):
    rng = np.random.default_rng(13)
    tau = np.array([0.5])
    for _ in range(5):
        geom = _random_disk_geometry(rng)
        wider = geom.model_copy(update={"rho": geom.rho * 1.5})
        low = l1_oplb_step(geom, unit_disk, tau, TIGHT).objective_value
        high = l1_oplb_step(wider, unit_disk, tau, TIGHT).objective_value
        assert high >= low - 1e-8


def _check_vertex_optimality(geometries, interior, seed, unit_disk):
    rng = np.random.default_rng(seed)
    tau = np.array([0.5])
    for _ in range(geometries):
        geom = _random_disk_geometry(rng)
        best = max(evaluate_f(v, geom, unit_disk, tau, TIGHT)[0] for v in l1_vertices(geom))
        radius = geom.rho * math.sqrt(2) * geom.beta
        for _ in range(interior):
            u = rng.dirichlet(np.ones(2)) * rng.choice([-1.0, 1.0], size=2) * rng.uniform()
            theta = geom.theta_hat + radius * geom.gram_inv_sqrt @ u
            assert evaluate_f(theta, geom, unit_disk, tau, TIGHT)[0] <= best + 1e-8


def test_vertex_maximum_dominates_interior(unit_disk):
    _check_vertex_optimality(5, 20, seed=14, unit_disk=unit_disk)


@pytest.mark.slow
def test_vertex_maximum_dominates_interior_full(unit_disk):
    _check_vertex_optimality(50, 500, seed=140, unit_disk=unit_disk)


# upper bound maximization


def test_ubm_positive_slope_is_exact(two_intervals):
    geom = _geom([2.0], [[0.5]], beta=0.2, rho=2.0, gram=[[1.0]])
    tau = np.array([1.0])
    outcome = ubm_step(geom, two_intervals, tau, tol=TIGHT)
    assert outcome.branch is Branch.UBM_EXACT
    assert outcome.z_star[0] == pytest.approx(1.0 / 0.7, abs=1e-5)

    grid = np.linspace(-3.0, 3.0, 600_001)
    safe = grid[0.5 * grid + 0.2 * np.abs(grid) <= 1.0]
    best = float(np.max(2.0 * safe + 2.0 * 0.2 * np.abs(safe)))
    assert outcome.objective_value == pytest.approx(best, abs=2e-3)


def test_ubm_negative_slope_falls_back(two_intervals):
    geom = _geom([0.5], [[0.5]], beta=0.2, rho=2.0, gram=[[1.0]])
    outcome = ubm_step(geom, two_intervals, np.array([1.0]), tol=TIGHT)
    assert outcome.branch is Branch.L1
    assert outcome.subproblem_solves == 3


def test_ubm_numerical_failure_falls_back(two_intervals, mocker):
    geom = _geom([2.0], [[0.5]], beta=0.2, rho=2.0, gram=[[1.0]])
    calls = {"n": 0}

    def first_solve_fails(program, tol=None):
        calls["n"] += 1
        if calls["n"] == 1:
            return ConicSolution(status=SolverStatus.NUMERICAL_FAILURE)
        return solve_conic(program, tol)

    mocker.patch.object(engine, "solve_conic", side_effect=first_solve_fails)
    outcome = ubm_step(geom, two_intervals, np.array([1.0]), tol=TIGHT)
    assert outcome.branch is Branch.L1
    assert outcome.subproblem_solves == 3
    assert calls["n"] == 3
    _assert_safe(outcome, geom, np.array([1.0]))


def test_ubm_inactive_instances_never_exact(two_intervals):
    rng = np.random.default_rng(15)
    for _ in range(30):
        mu = float(rng.uniform(0.3, 1.0))
        rho = float(rng.uniform(1.5, 3.0))
        geom = _geom(
            [float(rng.uniform(0.05, rho * mu - 0.05))],
            [[mu]],
            beta=float(rng.uniform(0.05, 0.25)),
            rho=rho,
            gram=[[float(rng.uniform(0.5, 3.0))]],
        )
        tau = np.array([float(rng.uniform(0.5, 2.0))])
        outcome = ubm_step(geom, two_intervals, tau, tol=TIGHT)
        assert outcome.branch is not Branch.UBM_EXACT
        _assert_safe(outcome, geom, tau)


def test_ubm_exact_instances_match_l2_program(unit_disk):
    rng = np.random.default_rng(16)
    tau = np.array([0.5])
    for _ in range(30):
        A = rng.normal(size=(2, 2))
        gram = A @ A.T + np.eye(2)
        lam_max = float(np.linalg.eigvalsh(gram).max())
        # the pessimistic region then sits strictly inside the disk
        geom = _geom(
            rng.normal(size=2),
            rng.uniform(-0.2, 0.2, size=(1, 2)),
            beta=math.sqrt(lam_max) * float(rng.uniform(0.9, 1.5)),
            rho=float(rng.uniform(1.5, 5.0)),
            gram=gram,
        )
        outcome = ubm_step(geom, unit_disk, tau, tol=TIGHT)
        assert outcome.branch is Branch.UBM_EXACT
        assert outcome.objective_value == pytest.approx(_l2_ray_oracle(geom, tau), abs=2e-3)
        _assert_safe(outcome, geom, tau)


def test_ubm_with_two_constraints(unit_disk):
    rng = np.random.default_rng(17)
    tau = np.array([0.5, 0.8])
    for _ in range(10):
        A = rng.normal(size=(2, 2))
        geom = _geom(
            rng.normal(size=2),
            rng.uniform(-0.4, 0.4, size=(2, 2)),
            beta=float(rng.uniform(0.1, 1.0)),
            rho=float(rng.uniform(1.0, 5.0)),
            gram=A @ A.T + np.eye(2),
        )
        outcome = ubm_step(geom, unit_disk, tau, tol=TIGHT)
        assert outcome.branch in (Branch.UBM_EXACT, Branch.L1)
        _assert_safe(outcome, geom, tau)
        if outcome.branch is Branch.UBM_EXACT:
            assert outcome.objective_value == pytest.approx(_l2_ray_oracle(geom, tau), abs=2e-3)


def test_policy_weights_and_mean_are_validated():
    with pytest.raises(PolicyError):
        Policy(support=[(np.array([0.0]), 0.5)], mean=np.array([0.0]))
    with pytest.raises(PolicyError):
        Policy(support=[(np.array([1.0]), 1.0)], mean=np.array([0.0]))
    policy = Policy.from_mixture([(np.array([1.0]), 2.0), (np.array([3.0]), 2.0), (np.array([9.0]), 0.0)])
    assert policy.weights.tolist() == [0.5, 0.5]
    np.testing.assert_allclose(policy.mean, [2.0])
