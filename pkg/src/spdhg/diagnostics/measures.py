"""Optimality measures: Bregman distances, Lyapunov forms, KKT residual and gaps."""

from __future__ import annotations

import numpy as np

from ..funcs import InfeasibleQueryError

__all__ = [
    "probs_vector",
    "dual_row_weights",
    "bregman_dg",
    "bregman_dfstar",
    "lyapunov_v",
    "lyapunov_vk",
    "lower_bound_v",
    "lower_bound_vk",
    "kkt_residual",
    "gap_at",
    "smoothed_gap",
    "objective_residual",
    "feasibility",
    "dist_to_ref",
]


def probs_vector(probs, n):
    """Probabilities as an array; ``None`` means uniform."""
    if probs is None:
        return np.full(n, 1.0 / n)
    return np.asarray(getattr(probs, "probs", probs), dtype=np.float64)


def dual_row_weights(steps, A, probs=None):
    """Row weights of ``||.||^2_{D(σ)^-1 P^-1}``, i.e. ``1 / (σ_i p_i)``."""
    p = probs_vector(probs, A.n)
    return np.repeat(1.0 / (steps.sigma * p), A.block_dims)


def _norm2(v, w=1.0):
    return float(np.sum(w * v * v))


# ----------------------------------------------------------------------
# Bregman distances


def bregman_dg(x, zbar, problem):
    """``D_g(x; z̄) = g(x) - g(x̄) + <A^T ȳ, x - x̄>`` (``inf`` off ``dom g``)."""
    xbar, ybar = zbar
    gx = problem.g.value(x)
    if not np.isfinite(gx):
        return np.inf
    aty = problem.A.full_adjoint(ybar)
    return gx - problem.g.value(xbar) + float(aty @ (np.asarray(x) - xbar))


def bregman_dfstar(y, zbar, problem):
    """``D_{f*}(y; z̄) = f*(y) - f*(ȳ) - <A x̄, y - ȳ>`` (``inf`` off ``dom f*``)."""
    xbar, ybar = zbar
    fy = problem.f.conj_value(y)
    if not np.isfinite(fy):
        return np.inf
    ax = problem.A.full_apply(xbar)
    return fy - problem.f.conj_value(ybar) - float(ax @ (np.asarray(y) - ybar))


# ----------------------------------------------------------------------
# Lyapunov quadratic forms


def lyapunov_v(dx, dy, steps, A, probs=None):
    """``V(dz) = ½||dx||²_{τ⁻¹} + ½||dy||²_{D⁻¹P⁻¹} + <A dx, P⁻¹ dy>``."""
    p_rows = np.repeat(probs_vector(probs, A.n), A.block_dims)
    w = dual_row_weights(steps, A, probs)
    cross = float(A.full_apply(dx) @ (dy / p_rows))
    return 0.5 * _norm2(dx) / steps.tau + 0.5 * _norm2(dy, w) + cross


def lyapunov_vk(dx, dy, ydiff, steps, A, probs=None):
    """``V_k(dx, dy)`` with trailing dual difference ``ydiff = y^k - y^{k-1}``.

    ``½||dx||²_{τ⁻¹} - <A dx, P⁻¹ ydiff> + ½||ydiff||²_{D⁻¹P⁻¹} + ½||dy||²_{D⁻¹P⁻¹}``.
    """
    p_rows = np.repeat(probs_vector(probs, A.n), A.block_dims)
    w = dual_row_weights(steps, A, probs)
    cross = float(A.full_apply(dx) @ (ydiff / p_rows))
    return 0.5 * _norm2(dx) / steps.tau - cross + 0.5 * _norm2(ydiff, w) + 0.5 * _norm2(dy, w)


def lower_bound_v(dx, dy, steps, A, probs=None):
    """Right-hand side ``C₁(½||dx||²_{τ⁻¹} + ½||dy||²_{D⁻¹P⁻¹})`` of the bound on ``V``."""
    w = dual_row_weights(steps, A, probs)
    return steps.c1 * (0.5 * _norm2(dx) / steps.tau + 0.5 * _norm2(dy, w))


def lower_bound_vk(dx, dy, ydiff, steps, A, probs=None):
    """Right-hand side of the bound on ``V_k``."""
    w = dual_row_weights(steps, A, probs)
    return (steps.c1 * (0.5 * _norm2(dx) / steps.tau + 0.5 * _norm2(ydiff, w))
            + 0.5 * _norm2(dy, w))


# ----------------------------------------------------------------------
# residuals and gaps


def kkt_residual(x, y, problem, steps=None, weighted=True):
    """Distance from zero to the KKT map at ``(x, y)``.

    Combines ``dist(-A^T y, ∂g(x))`` and the per-block
    ``dist(A_i x, ∂f_i*(y_i))``.  With ``weighted`` (and ``steps`` given) the
    squares are scaled by ``1/τ`` and ``1/σ_i``.  Off-domain points give
    ``inf``.
    """
    A = problem.A
    try:
        dg = problem.g.subdiff_dist(x, -A.full_adjoint(y))
        dfs = problem.f.conj_subdiff_dists(y, A.full_apply(x), A.offsets)
    except InfeasibleQueryError:
        return np.inf
    if weighted and steps is not None:
        return float(np.sqrt(dg ** 2 / steps.tau + np.sum(dfs ** 2 / steps.sigma)))
    return float(np.sqrt(dg ** 2 + np.sum(dfs ** 2)))


def gap_at(zbar, z, problem):
    """``H(x̄, ȳ; x, y) = g(x̄) + <Ax̄, y> - f*(y) - g(x) - <Ax, ȳ> + f*(ȳ)``."""
    xbar, ybar = zbar
    x, y = z
    A = problem.A
    g_bar = problem.g.value(xbar)
    f_bar = problem.f.conj_value(ybar)
    if not (np.isfinite(g_bar) and np.isfinite(f_bar)):
        return np.inf
    return (g_bar + float(A.full_apply(xbar) @ y) - problem.f.conj_value(y)
            - problem.g.value(x) - float(A.full_apply(x) @ ybar) + f_bar)


def smoothed_gap(zbar, anchors, alpha, beta, problem, x_weight=1.0, y_weights=1.0):
    """Smoothed gap ``sup_z H(z̄; z) - α/2||x - x̂||²_W - β/2||y - ŷ||²_M``.

    ``W = x_weight I`` and ``M = diag(y_weights)``; both default to the
    identity.  The suprema separate and are attained at
    ``u = prox_{g, (αW)⁻¹}(x̂ - (αW)⁻¹ A^T ȳ)`` and
    ``v = prox_{f*, (βM)⁻¹}(ŷ + (βM)⁻¹ A x̄)``.
    """
    if not (alpha > 0 and beta > 0):
        raise ValueError("smoothing parameters must be positive")
    xbar, ybar = zbar
    xhat, yhat = anchors
    A = problem.A
    tx = 1.0 / (alpha * np.asarray(x_weight, dtype=np.float64))
    ty = 1.0 / (beta * np.broadcast_to(np.asarray(y_weights, dtype=np.float64), (A.m,)))
    u = problem.g.prox(xhat - tx * A.full_adjoint(ybar), tx)
    v = problem.f.conj_prox(yhat + ty * A.full_apply(xbar), ty)
    pen_x = 0.5 * alpha * float(np.sum(x_weight * (u - xhat) ** 2))
    pen_y = 0.5 * beta * float(np.sum(y_weights * (v - yhat) ** 2))
    return gap_at(zbar, (u, v), problem) - pen_x - pen_y


def _reference(problem, reference):
    ref = problem.reference if reference is None else reference
    if ref is None:
        raise ValueError("a reference solution is required")
    return ref


def objective_residual(x, problem, reference=None):
    """``P(x) - P(x*)``; for equality constraints the signed ``g(x) - g(x*)``."""
    ref = _reference(problem, reference)
    if problem.constrained:
        return problem.g.value(x) - problem.g.value(ref.x_star)
    return problem.objective(x) - ref.objective_star


def feasibility(x, problem, weighted=False, steps=None, probs=None):
    """``||Ax - b||``, or ``||Ax - b||_{D(σ)P}`` when ``weighted``."""
    if not problem.constrained:
        raise ValueError("feasibility needs a constraint vector b")
    r = problem.A.full_apply(x) - problem.b
    if not weighted:
        return float(np.linalg.norm(r))
    if steps is None:
        raise ValueError("weighted feasibility needs step sizes")
    A = problem.A
    w = np.repeat(steps.sigma * probs_vector(probs, A.n), A.block_dims)
    return float(np.sqrt(np.sum(w * r * r)))


def dist_to_ref(x, problem, reference=None):
    """``||x - x*|| / ||x*||`` (absolute when ``x* = 0``)."""
    ref = _reference(problem, reference)
    scale = np.linalg.norm(ref.x_star)
    d = float(np.linalg.norm(np.asarray(x) - ref.x_star))
    return d / scale if scale > 0 else d
