# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from .config import PRESETS, load_config, load_preset, parse_config, with_overrides
from .plots import emit_plots
from .replication import replicate, replicate_async
from .runner import policy_step, run_experiment
from .schema import ExperimentConfig, ReplicateSummary, RunArtifacts, RunSummary

__all__ = [
    "PRESETS",
    "ExperimentConfig",
    "ReplicateSummary",
    "RunArtifacts",
    "RunSummary",
    "emit_plots",
    "load_config",
    "load_preset",
    "parse_config",
    "policy_step",
    "replicate",
    "replicate_async",
    "run_experiment",
    "with_overrides",
]
