"""Config-driven experiments, sweeps, output writers and the ``ibfem`` CLI."""
from .config import ExperimentConfig, build_config, load_config
from .presets import PRESETS, preset
from .runner import run_experiment, sweep_stability

__all__ = ["ExperimentConfig", "PRESETS", "build_config", "load_config", "preset",
           "run_experiment", "sweep_stability"]
