"""Optimality measures, theory constants, rate fits and log records."""

from .constants import ErgodicConstants, delta0, theory_constant_ce
from .measures import (bregman_dfstar, bregman_dg, dist_to_ref, dual_row_weights, feasibility,
                       gap_at, kkt_residual, lower_bound_v, lower_bound_vk, lyapunov_v,
                       lyapunov_vk, objective_residual, smoothed_gap)
from .rates import RateModel, rate_fit
from .records import METRICS, ConvergenceRecord, evaluate_metrics, validate_metric_names

__all__ = [
    "ErgodicConstants", "delta0", "theory_constant_ce",
    "bregman_dfstar", "bregman_dg", "dist_to_ref", "dual_row_weights", "feasibility", "gap_at",
    "kkt_residual", "lower_bound_v", "lower_bound_vk", "lyapunov_v", "lyapunov_vk",
    "objective_residual", "smoothed_gap",
    "RateModel", "rate_fit",
    "METRICS", "ConvergenceRecord", "evaluate_metrics", "validate_metric_names",
]
