import math

import numpy as np
import pytest

from cclb.core.estimation import beta
from cclb.core.exception import SolverError
from cclb.core.policy import Branch
from cclb.harness import runner
from cclb.harness.config import build_decision_set, build_state
from cclb.harness.runner import (
    LOG_FILE,
    cached_oracle,
    policy_step,
    read_summary,
    read_trajectory,
    run_experiment,
)
from cclb.harness.schema import ExperimentConfig
from cclb.settings import RuntimeSettings
from cclb.sim import read_ledger


@pytest.fixture
def settings():
    return RuntimeSettings(max_workers=1, log_level="DEBUG")


def _config(tmp_path, **change) -> ExperimentConfig:
    raw = {
        "name": "unit-disk-small",
        "decision_set": [{"type": "ball", "center": [0.0, 0.0], "radius": 1.0}],
        "theta_star": [3.0, 2.5],
        "gamma_star": [[0.5, 0.5]],
        "tau": [0.5],
        "safe_action": [0.0, 0.0],
        "algorithm": "ubm_oplb",
        "horizon": 8,
        "master_seed": 2024,
        "regularization": 0.1,
        "delta": 0.05,
        "noise_scale": 0.1,
        "param_bound": 4.0,
        "output_dir": str(tmp_path / "run"),
    }
    raw.update(change)
    return ExperimentConfig.model_validate(raw)


def test_oracle_only_has_zero_regret(tmp_path, settings):
    config = _config(tmp_path, algorithm="oracle_only", horizon=10)
    artifacts = run_experiment(config, settings=settings)
    ledger = read_ledger(artifacts.ledger_path)
    assert len(ledger.records) == 10
    assert all(rec.regret_increment == 0.0 for rec in ledger.records)
    assert all(rec.branch is Branch.ORACLE for rec in ledger.records)
    assert artifacts.summary.final_cumulative_regret == 0.0
    assert artifacts.summary.optimal_value == pytest.approx(3.0, abs=1e-5)
    assert artifacts.summary.subproblem_solves == 0
    assert artifacts.summary.optimal_mean == pytest.approx([1.0, 0.0], abs=1e-5)
    assert read_summary(artifacts.summary_path).optimal_mean == artifacts.summary.optimal_mean


def test_l1_first_round_stays_in_initial_safe_ball(tmp_path, settings):
    config = _config(tmp_path, algorithm="l1_oplb", horizon=1)
    artifacts = run_experiment(config, settings=settings)
    trajectory = read_trajectory(artifacts.trajectory_path)
    branch = trajectory["branch"].iloc[0]
    assert branch in {Branch.L1.value, Branch.SAFE_FALLBACK.value}

    state = build_state(config, build_decision_set(config))
    radius = 0.5 * math.sqrt(0.1) / beta(state)
    mean = trajectory[["mean_1", "mean_2"]].to_numpy()[0]
    assert np.linalg.norm(mean) <= radius + 1e-6
    assert artifacts.summary.violation_count == 0


def test_ubm_branches_are_closed(tmp_path, settings):
    artifacts = run_experiment(_config(tmp_path, horizon=6), settings=settings)
    ledger = read_ledger(artifacts.ledger_path)
    allowed = {Branch.UBM_EXACT, Branch.L1, Branch.SAFE_FALLBACK}
    assert {rec.branch for rec in ledger.records} <= allowed
    assert sum(artifacts.summary.branch_counts.values()) == 6


def test_artifacts_parse_back(tmp_path, settings):
    config = _config(tmp_path, algorithm="l1_oplb", horizon=5)
    artifacts = run_experiment(config, settings=settings)
    assert read_summary(artifacts.summary_path) == artifacts.summary

    ledger = read_ledger(artifacts.ledger_path)
    assert ledger.cumulative_regret == artifacts.summary.final_cumulative_regret
    assert ledger.violations == artifacts.summary.violation_count
    assert ledger.branch_counts() == artifacts.summary.branch_counts
    assert [rec.cumulative_regret for rec in ledger.records] == ledger.recomputed_cumulative()

    trajectory = read_trajectory(artifacts.trajectory_path)
    assert list(trajectory["t"]) == [1, 2, 3, 4, 5]
    for _, row in trajectory.iterrows():
        weights = [s["weight"] for s in row["support"]]
        points = np.array([s["point"] for s in row["support"]])
        assert sum(weights) == pytest.approx(1.0)
        np.testing.assert_allclose(np.asarray(weights) @ points, [row["mean_1"], row["mean_2"]], atol=1e-7)
        assert any(np.allclose(p, [row["action_1"], row["action_2"]]) for p in points)

    assert (artifacts.ledger_path.parent / LOG_FILE).read_text()


def test_rerun_reproduces_ledger_bytes(tmp_path, settings):
    config = _config(tmp_path, horizon=6)
    first = run_experiment(config, output_dir=tmp_path / "a", settings=settings)
    second = run_experiment(config, output_dir=tmp_path / "b", settings=settings)
    assert first.ledger_path.read_bytes() == second.ledger_path.read_bytes()
    assert first.trajectory_path.read_bytes() == second.trajectory_path.read_bytes()

    uncached = RuntimeSettings(max_workers=1, cache_oracle=False)
    third = run_experiment(config, output_dir=tmp_path / "c", settings=uncached)
    assert third.ledger_path.read_bytes() == first.ledger_path.read_bytes()


def test_different_runs_use_different_seeds(tmp_path, settings):
    config = _config(tmp_path, algorithm="l1_oplb", horizon=4)
    first = run_experiment(config, run_index=0, output_dir=tmp_path / "a", settings=settings)
    second = run_experiment(config, run_index=1, output_dir=tmp_path / "b", settings=settings)
    assert first.summary.seed == 2024
    assert second.summary.seed == 2025
    assert first.ledger_path.read_bytes() != second.ledger_path.read_bytes()


def test_oracle_is_cached(tmp_path, mocker):
    config = _config(tmp_path)
    dset = build_decision_set(config)
    cache_dir = tmp_path / "cache"
    fresh = cached_oracle(config, dset, cache_dir)
    mocker.patch.object(runner, "oracle_policy", side_effect=AssertionError("cache missed"))
    again = cached_oracle(config, dset, cache_dir)
    mocker.stopall()
    np.testing.assert_array_equal(fresh.mean, again.mean)
    np.testing.assert_array_equal(fresh.weights, again.weights)

    other = config.model_copy(update={"theta_star": [2.5, 3.0]})
    mirrored = cached_oracle(other, dset, cache_dir)
    np.testing.assert_allclose(mirrored.mean, [0.0, 1.0], atol=1e-5)


def test_solver_failure_flushes_partial_artifacts(tmp_path, settings, mocker):
    config = _config(tmp_path, algorithm="oracle_only", horizon=6)
    calls = {"n": 0}

    def failing_step(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 3:
            raise SolverError("NumericalFailure in vertex 2")
        return policy_step(*args, **kwargs)

    mocker.patch.object(runner, "policy_step", side_effect=failing_step)
    with pytest.raises(SolverError) as info:
        run_experiment(config, settings=settings)

    assert info.value.round_index == 3
    assert "round 3" in info.value.message
    assert info.value.message.count("Solver error") == 1
    out = tmp_path / "run"
    assert len(read_ledger(out / "ledger.csv").records) == 2
    assert read_summary(out / "summary.json").completed_rounds == 2


def test_policy_step_dispatch(tmp_path):
    config = _config(tmp_path)
    dset = build_decision_set(config)
    state = build_state(config, dset)
    optimal = cached_oracle(config, dset)

    oracle = policy_step(config.model_copy(update={"algorithm": "oracle_only"}), state, dset, optimal)
    assert oracle.branch is Branch.ORACLE
    assert oracle.objective_value == pytest.approx(3.0, abs=1e-5)

    l1 = policy_step(config.model_copy(update={"algorithm": "l1_oplb"}), state, dset, optimal)
    assert l1.branch in {Branch.L1, Branch.SAFE_FALLBACK}
    assert l1.subproblem_solves == 4

    ubm = policy_step(config, state, dset, optimal)
    assert ubm.branch in {Branch.UBM_EXACT, Branch.L1, Branch.SAFE_FALLBACK}
