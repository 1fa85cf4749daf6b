"""Constants of the ergodic ``O(1/K)`` bounds.

The initial point is ``x⁰`` and ``y¹ = y⁰``; the auxiliary dual anchor is
taken equal to ``y¹``, so the anchor of the smoothed gap is ``ẏ = y¹`` and
the term measuring their difference vanishes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .measures import dual_row_weights, probs_vector

__all__ = ["delta0", "ErgodicConstants", "theory_constant_ce"]


def _initial(problem, x0, y0):
    x0 = np.zeros(problem.p) if x0 is None else np.asarray(x0, dtype=np.float64)
    y0 = np.zeros(problem.m) if y0 is None else np.asarray(y0, dtype=np.float64)
    return x0, y0


def _ref(problem, reference):
    ref = problem.reference if reference is None else reference
    if ref is None or ref.y_star is None:
        raise ValueError("a primal-dual reference solution is required")
    return ref


def delta0(problem, steps, probs=None, x0=None, y0=None, reference=None):
    """``Δ⁰ = ½||x⁰ - x*||²_{τ⁻¹} + ½||y⁰ - y*||²_{D(σ)⁻¹P⁻¹}``.

    This is ``V_1(x⁰ - x*, y¹ - y*)`` with ``y¹ = y⁰``.
    """
    ref = _ref(problem, reference)
    x0, y0 = _initial(problem, x0, y0)
    w = dual_row_weights(steps, problem.A, probs)
    dx = x0 - ref.x_star
    dy = y0 - ref.y_star
    return 0.5 * float(dx @ dx) / steps.tau + 0.5 * float(np.sum(w * dy * dy))


@dataclass
class ErgodicConstants:
    """``C_e`` with its terms, plus the derived constants when they apply.

    ``ce1`` is set for Lipschitz ``f``; ``ce2`` and ``ce3`` for equality
    constraints.  ``terms`` lists the summands of ``C_e`` by name.
    """

    ce: float
    delta0: float
    terms: dict = field(default_factory=dict)
    ce1: float | None = None
    ce2: float | None = None
    ce3: float | None = None
    lipschitz_sq: float | None = None


def theory_constant_ce(problem, steps, probs=None, x0=None, y0=None, reference=None):
    """Evaluate ``C_e`` termwise and the derived ``C_{e,1}``, ``C_{e,2}``, ``C_{e,3}``.

    Raises
    ------
    ValueError
        If ``f*(y¹) = inf`` (the initial dual point must lie in ``dom f*``)
        or no primal-dual reference is available.
    """
    ref = _ref(problem, reference)
    A = problem.A
    x0, y0 = _initial(problem, x0, y0)
    p = probs_vector(probs, A.n)
    p_min = float(p.min())
    c1 = steps.c1
    w = dual_row_weights(steps, A, probs)
    d0 = delta0(problem, steps, probs, x0, y0, ref)

    fy1 = np.array([problem.f_block(i).conj_value(y0[A.offsets[i]:A.offsets[i + 1]])
                    for i in range(A.n)])
    if not np.all(np.isfinite(fy1)):
        raise ValueError("initial dual point is outside dom f*")
    fys = np.array([problem.f_block(i).conj_value(ref.y_star[A.offsets[i]:A.offsets[i + 1]])
                    for i in range(A.n)])
    ax = A.full_apply(ref.x_star)
    ax_norm = np.array([np.linalg.norm(ax[A.offsets[i]:A.offsets[i + 1]])
                        for i in range(A.n)]) * np.sqrt(steps.sigma * p)
    dy1 = y0 - ref.y_star

    terms = {
        "x0_norm": steps.gamma * float(x0 @ x0) / steps.tau,
        "anchor_gap": 0.0,
        "y1_dist": steps.gamma / p_min * float(np.sum(w * dy1 * dy1)),
        "delta0_scaled": 2.0 * steps.gamma / p_min * d0,
        "delta0_over_c1": d0 / c1,
        "fstar_y1": float(np.sum((1.0 / p - 1.0) * fy1)),
        "fstar_ystar": float(np.sum((1.0 / p - 1.0) * (-fys + ax_norm * np.sqrt(2.0 * d0)))),
    }
    ce = float(sum(terms.values()))
    out = ErgodicConstants(ce, d0, terms)

    dx0 = x0 - ref.x_star
    x_term = float(dx0 @ dx0) / steps.tau
    lip = problem.f.lipschitz_sq_per_coord()
    if lip is not None:
        out.lipschitz_sq = float(np.sum(lip / np.repeat(steps.sigma, A.block_dims)))
        out.ce1 = ce + 2.0 / p_min * out.lipschitz_sq + 0.5 * (1.0 + 2.0 * steps.gamma) * x_term
    if problem.constrained:
        ydot = y0
        r = float(np.sqrt(np.sum(w * (ref.y_star - ydot) ** 2)))
        out.ce3 = 0.5 * (r + np.sqrt(r * r + 4.0 * ce + 2.0 * (1.0 + 2.0 * steps.gamma) * x_term))
        ystar_norm = float(np.sqrt(np.sum(w * ref.y_star ** 2)))
        out.ce2 = (ce + 0.5 * r * r + 0.5 * (1.0 + 2.0 * steps.gamma) * x_term
                   + ystar_norm * out.ce3)
    return out
