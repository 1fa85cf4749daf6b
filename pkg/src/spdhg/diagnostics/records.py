"""Per-log-point metric rows."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import measures

__all__ = ["ConvergenceRecord", "METRICS", "evaluate_metrics"]

METRICS = (
    "objective_residual",
    "feasibility",
    "kkt_residual",
    "dist_to_ref",
    "bregman",
    "smoothed_gap",
    "gap_at_ref",
    "lyapunov_V",
)

_NEEDS_REF = {"objective_residual", "dist_to_ref", "bregman", "gap_at_ref", "lyapunov_V"}


@dataclass
class ConvergenceRecord:
    """Metrics at iteration ``iter`` (``epoch = iter / n`` unless overridden)."""

    iter: int
    epoch: float
    metrics: dict = field(default_factory=dict)


def _split_name(name):
    if name.endswith("_avg"):
        return name[:-4], True
    return name, False


def validate_metric_names(names, problem):
    """Reject unknown names and metrics the problem cannot provide."""
    for name in names:
        base, _ = _split_name(name)
        if base not in METRICS:
            raise ValueError(f"unknown metric {name!r}; choose from {METRICS} (optionally +'_avg')")
        if base in _NEEDS_REF and problem.reference is None:
            raise ValueError(f"metric {name!r} needs a reference solution")
        if base == "feasibility" and not problem.constrained:
            raise ValueError("feasibility is defined for equality-constrained problems only")
        if base in ("bregman", "gap_at_ref", "lyapunov_V") and problem.reference.y_star is None:
            raise ValueError(f"metric {name!r} needs a dual reference")


def evaluate_metrics(problem, state, steps, names, probs=None, anchors=None):
    """Evaluate the requested metrics at the last iterate or the ergodic average.

    Names ending in ``_avg`` use ``(x_av^K, y_av^{K+1})``; they are ``nan``
    before the first iteration.  ``steps`` may be ``None`` for methods
    without SPDHG step sizes; the weighted measures then fall back to the
    Euclidean ones.  ``smoothed_gap`` uses the smoothing parameters
    ``α = (1+2γ)/(2K)``, ``β = 1/(2K)`` (``K = max(k, 1)``) with anchors
    ``anchors`` (default zero) in the step-size weighted norms.
    """
    ref = problem.reference
    out = {}
    for name in names:
        base, avg = _split_name(name)
        if avg:
            erg = state.ergodic
            if erg is None or erg.count == 0:
                out[name] = np.nan
                continue
            x, y = erg.x_avg, erg.y_avg
        else:
            x, y = state.x, state.y
        if base == "objective_residual":
            val = measures.objective_residual(x, problem)
        elif base == "feasibility":
            val = (measures.feasibility(x, problem, True, steps, probs) if steps is not None
                   else measures.feasibility(x, problem))
        elif base == "kkt_residual":
            val = measures.kkt_residual(x, y, problem, steps, weighted=steps is not None)
        elif base == "dist_to_ref":
            val = measures.dist_to_ref(x, problem)
        elif base == "bregman":
            z = (ref.x_star, ref.y_star)
            val = measures.bregman_dg(x, z, problem) + measures.bregman_dfstar(y, z, problem)
        elif base == "gap_at_ref":
            val = measures.gap_at((x, y), (ref.x_star, ref.y_star), problem)
        elif base == "smoothed_gap":
            K = max(state.k, 1)
            gamma = steps.gamma if steps is not None else 0.5
            xh, yh = anchors if anchors is not None else (np.zeros(problem.p), np.zeros(problem.m))
            if steps is not None:
                xw, yw = 1.0 / steps.tau, measures.dual_row_weights(steps, problem.A, probs)
            else:
                xw, yw = 1.0, 1.0
            val = measures.smoothed_gap((x, y), (xh, yh), (1 + 2 * gamma) / (2 * K), 1 / (2 * K),
                                        problem, xw, yw)
        elif base == "lyapunov_V":
            if steps is None:
                val = np.nan
            else:
                ydiff = state.y - state.y_prev
                val = measures.lyapunov_vk(x - ref.x_star, y - ref.y_star, ydiff, steps,
                                           problem.A, probs)
        else:  # pragma: no cover - guarded by validate_metric_names
            raise ValueError(name)
        out[name] = float(val)
    return out
