"""Experiment configuration, Monte-Carlo runs, outputs, plots and the CLI."""

from .config import AlgoSpec, ExperimentConfig, load_config, load_preset, parse_config, preset_names
from .outputs import read_results, summarize, write_outputs
from .plots import emit_plots
from .runner import ResultsTable, Row, run_experiment, trial_seed

__all__ = ["AlgoSpec", "ExperimentConfig", "load_config", "load_preset", "parse_config", "preset_names",
           "read_results", "summarize", "write_outputs", "emit_plots", "ResultsTable", "Row",
           "run_experiment", "trial_seed"]
