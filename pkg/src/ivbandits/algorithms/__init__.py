"""Adaptive procedures and baselines for confounded pure exploration."""

from ._common import AlgoParams, PhaseRecord, TrialResult, eliminate, phase_size
from .cpeg import StaticKind, run_cpeg, run_static_baseline
from .cpeug import gamma_estimator, run_cpeug, stop_value, theta_estimator
from .plugin import gamma_slack, run_cpeg_plugin
from .ucb import Recommender, run_ucb_baseline
from .warmup import estimate_lambda_min

__all__ = [
    "AlgoParams", "PhaseRecord", "TrialResult", "eliminate", "phase_size",
    "StaticKind", "run_cpeg", "run_static_baseline",
    "gamma_estimator", "run_cpeug", "stop_value", "theta_estimator",
    "gamma_slack", "run_cpeg_plugin",
    "Recommender", "run_ucb_baseline",
    "estimate_lambda_min",
]
