# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from concurrent.futures import Executor
from pathlib import Path

import numpy as np
import orjson
import pandas as pd
from diskcache import Cache
from loguru import logger

from cclb.core.decision import DecisionSet
from cclb.core.estimation import ConfidenceState, geometry, update
from cclb.core.exception import SolverError
from cclb.core.policy import Branch, Policy, StepOutcome, l1_oplb_step, oracle_policy, ubm_step
from cclb.harness.config import build_decision_set, build_environment, build_state
from cclb.harness.schema import ExperimentConfig, RunArtifacts, RunSummary
from cclb.settings import RuntimeSettings
from cclb.sim import (
    RegretLedger,
    expected_cost,
    observe,
    regret_increment,
    sample_action,
    violation_check,
    write_ledger,
)
from cclb.sim.ledger import FLOAT_FORMAT
from cclb.util import dumps, problem_id

LEDGER_FILE = "ledger.csv"
TRAJECTORY_FILE = "trajectory.csv"
SUMMARY_FILE = "summary.json"
LOG_FILE = "run.log"
CACHE_DIR = ".oracle_cache"


def cached_oracle(
    config: ExperimentConfig,
    decision_set: DecisionSet,
    cache_dir: Path | None = None,
) -> Policy:
    """The omniscient policy for the config's problem, memoized on disk by problem content."""

    def solve() -> Policy:
        return oracle_policy(
            np.asarray(config.theta_star), np.asarray(config.gamma_star), np.asarray(config.tau), decision_set
        )

    if cache_dir is None:
        return solve()

    key = problem_id(
        pieces=[spec.model_dump() for spec in config.decision_set],
        theta=config.theta_star,
        gamma=config.gamma_star,
        tau=config.tau,
        safe_action=config.safe_action,
    )
    with Cache(str(cache_dir)) as cache:
        raw = cache.get(key)
        if raw is not None:
            logger.debug(f"oracle cache hit {key[:12]}")
            return Policy.from_mixture([(np.asarray(p["point"]), p["weight"]) for p in orjson.loads(raw)])
        policy = solve()
        cache.set(key, dumps(policy.to_records()))
        return policy


def policy_step(
    config: ExperimentConfig,
    state: ConfidenceState,
    decision_set: DecisionSet,
    optimal: Policy,
    executor: Executor | None = None,
) -> StepOutcome:
    if config.algorithm == "oracle_only":
        return StepOutcome(
            policy=optimal,
            z_star=optimal.mean.copy(),
            branch=Branch.ORACLE,
            objective_value=float(np.asarray(config.theta_star) @ optimal.mean),
        )
    geom = geometry(state, config.use_literal_gram_norm)
    tau = np.asarray(config.tau, dtype=float)
    if config.algorithm == "l1_oplb":
        return l1_oplb_step(geom, decision_set, tau, executor=executor)
    return ubm_step(geom, decision_set, tau, config.activity_tol, executor=executor)


def _trajectory_frame(rows: list[dict], dim: int) -> pd.DataFrame:
    means = [f"mean_{i + 1}" for i in range(dim)]
    actions = [f"action_{i + 1}" for i in range(dim)]
    return pd.DataFrame(rows, columns=["t", "branch", *means, *actions, "support"])


def _flush(
    out: Path,
    config: ExperimentConfig,
    seed: int,
    ledger: RegretLedger,
    trajectory: list[dict],
    optimal: Policy,
    optimal_value: float,
    solves: int,
) -> RunArtifacts:
    ledger_path = write_ledger(ledger, out / LEDGER_FILE)
    trajectory_path = out / TRAJECTORY_FILE
    _trajectory_frame(trajectory, config.dim).to_csv(
        trajectory_path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n"
    )
    summary = RunSummary(
        name=config.name,
        algorithm=config.algorithm,
        seed=seed,
        horizon=config.horizon,
        optimal_value=optimal_value,
        optimal_mean=optimal.mean.tolist(),
        final_cumulative_regret=ledger.cumulative_regret,
        violation_count=ledger.violations,
        branch_counts=ledger.branch_counts(),
        subproblem_solves=solves,
        completed_rounds=len(ledger.records),
    )
    summary_path = out / SUMMARY_FILE
    summary_path.write_bytes(orjson.dumps(summary.model_dump(mode="json"), option=orjson.OPT_INDENT_2))
    return RunArtifacts(
        ledger_path=ledger_path, trajectory_path=trajectory_path, summary_path=summary_path, summary=summary
    )


def run_experiment(
    config: ExperimentConfig,
    run_index: int = 0,
    output_dir: str | Path | None = None,
    settings: RuntimeSettings | None = None,
    executor: Executor | None = None,
    cache_dir: Path | None = None,
) -> RunArtifacts:
    """
    Play one bandit run of `config.horizon` rounds and write its artifacts.

    In each round the policy step picks a policy from the current estimate, an action is sampled and
    observed, the estimate is updated and the round is booked in the ledger against the omniscient policy.

    Args:
        config (ExperimentConfig): The experiment.
        run_index (int): Replicate index; the run's seed is master_seed XOR run_index.
        output_dir (str | Path | None): Artifact directory; config.output_dir when absent.
        settings (RuntimeSettings | None): Log level and oracle caching switch.
        executor (Executor | None): Optional pool for the vertex subproblems.
        cache_dir (Path | None): Oracle cache location; <output_dir>/.oracle_cache when absent.

    Returns:
        RunArtifacts: Paths of ledger.csv, trajectory.csv and summary.json plus the summary.

    Raises:
        SolverError: With the failing round index, after the completed rounds were flushed to disk.
    """
    settings = settings or RuntimeSettings()
    out = Path(output_dir or config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if cache_dir is None and settings.cache_oracle:
        cache_dir = out / CACHE_DIR
    seed = config.seed_for(run_index)

    sink = logger.add(out / LOG_FILE, level=settings.log_level, mode="w")
    try:
        logger.info(f"run {config.name} [{config.algorithm}] seed {seed}, T = {config.horizon}")
        decision_set = build_decision_set(config)
        env = build_environment(config, seed)
        optimal = cached_oracle(config, decision_set, cache_dir if settings.cache_oracle else None)
        optimal_value = float(env.theta_star @ optimal.mean)
        logger.info(f"optimal value {optimal_value:.6f} at {optimal.mean}")

        state = build_state(config, decision_set)
        rng = env.rng()
        ledger = RegretLedger(num_constraints=env.num_constraints)
        trajectory: list[dict] = []
        solves = 0

        for t in range(1, config.horizon + 1):
            try:
                outcome = policy_step(config, state, decision_set, optimal, executor)
            except SolverError as e:
                logger.error(f"round {t}: {e.detail}")
                _flush(out, config, seed, ledger, trajectory, optimal, optimal_value, solves)
                raise SolverError(e.detail, round_index=t) from e
            solves += outcome.subproblem_solves

            policy = outcome.policy
            x = sample_action(policy, rng)
            r, c = observe(env, x, rng)
            state = update(state, x, r, c)

            ledger.append(
                optimal_value=optimal_value,
                policy_value=float(env.theta_star @ policy.mean),
                increment=regret_increment(env, optimal.mean, policy),
                costs=expected_cost(env, policy),
                violation=violation_check(env, policy),
                branch=outcome.branch,
                sampled_regret=optimal_value - float(env.theta_star @ x),
            )
            trajectory.append(
                {
                    "t": t,
                    "branch": outcome.branch.value,
                    **{f"mean_{i + 1}": float(v) for i, v in enumerate(policy.mean)},
                    **{f"action_{i + 1}": float(v) for i, v in enumerate(x)},
                    "support": dumps(policy.to_records()).decode(),
                }
            )
            if t % 100 == 0:
                logger.debug(f"round {t}: cumulative regret {ledger.cumulative_regret:.4f}")

        artifacts = _flush(out, config, seed, ledger, trajectory, optimal, optimal_value, solves)
        logger.info(
            f"finished: regret {ledger.cumulative_regret:.4f}, {ledger.violations} violations, "
            f"branches {artifacts.summary.branch_counts}"
        )
        return artifacts
    finally:
        logger.remove(sink)


def read_summary(path: str | Path) -> RunSummary:
    return RunSummary.model_validate(orjson.loads(Path(path).read_bytes()))


def read_trajectory(path: str | Path) -> pd.DataFrame:
    frame = pd.read_csv(path, float_precision="round_trip")
    frame["support"] = frame["support"].map(orjson.loads)
    return frame
