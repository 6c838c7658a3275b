# Copyright 2024 TsumiNa.
# SPDX-License-Identifier: MIT

from cclb.harness import ExperimentConfig, load_config, load_preset, replicate, run_experiment

__all__ = ["ExperimentConfig", "load_config", "load_preset", "replicate", "run_experiment"]
