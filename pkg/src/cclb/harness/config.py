# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from importlib import resources
from pathlib import Path

import orjson
from loguru import logger
from pydantic import ValidationError

from cclb.core.decision import DecisionSet
from cclb.core.estimation import ConfidenceState
from cclb.core.exception import ConfigError, DecisionSetError, DimensionError
from cclb.harness.schema import Algorithm, ExperimentConfig
from cclb.sim import Environment

PRESETS = ("unit_disk", "five_disks")


def parse_config(raw: bytes | str) -> ExperimentConfig:
    try:
        data = orjson.loads(raw)
    except orjson.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}") from e
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(e) from e


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} does not exist")
    logger.info(f"loading config {path}")
    return parse_config(path.read_bytes())


def load_preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}, choose one of {', '.join(PRESETS)}")
    raw = resources.files("cclb.harness").joinpath("presets", f"{name}.json").read_bytes()
    return parse_config(raw)


def with_overrides(
    config: ExperimentConfig,
    output_dir: str | Path | None = None,
    seed: int | None = None,
    algorithm: Algorithm | None = None,
) -> ExperimentConfig:
    update = {}
    if output_dir is not None:
        update["output_dir"] = str(output_dir)
    if seed is not None:
        update["master_seed"] = seed
    if algorithm is not None:
        update["algorithm"] = algorithm
    return config.model_copy(update=update)


def build_decision_set(config: ExperimentConfig) -> DecisionSet:
    try:
        return DecisionSet(
            pieces=[spec.build() for spec in config.decision_set],
            ambient_dim=config.dim,
            safe_action=config.safe_action,
        )
    except (DecisionSetError, DimensionError) as e:
        raise ConfigError(e.message) from e


def build_environment(config: ExperimentConfig, seed: int) -> Environment:
    return Environment(
        theta_star=config.theta_star,
        gamma_star=config.gamma_star,
        tau=config.tau,
        noise_scale=config.noise_scale,
        rng_seed=seed,
        safe_action=config.safe_action,
    )


def build_state(config: ExperimentConfig, decision_set: DecisionSet) -> ConfidenceState:
    return ConfidenceState.fresh(
        dim=config.dim,
        tau=config.tau,
        regularization=config.regularization,
        noise_scale=config.noise_scale,
        param_bound=config.param_bound,
        norm_bound=config.norm_bound or decision_set.norm_bound,
        delta=config.delta,
    )
