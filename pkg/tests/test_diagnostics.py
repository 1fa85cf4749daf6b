import warnings

import numpy as np
import pytest
from scipy import sparse

from conftest import random_problem
from spdhg.diagnostics import (delta0, evaluate_metrics, feasibility, kkt_residual,
                               objective_residual, rate_fit, theory_constant_ce)
from spdhg.diagnostics.measures import (bregman_dfstar, bregman_dg, dist_to_ref, gap_at,
                                        lower_bound_v, lower_bound_vk, lyapunov_v, lyapunov_vk,
                                        smoothed_gap)
from spdhg.diagnostics.records import validate_metric_names
from spdhg.funcs import L1, Hinge, IndicatorPoint, LeastSquares, SeparableSum, SquaredL2, Zero
from spdhg.harness.reference import certify_reference
from spdhg.linops import BlockLinearOperator
from spdhg.problems import GeneratorSpec, generate
from spdhg.sampling import SamplerSpec
from spdhg.solver import (ReferenceSolution, SaddleProblem, SolverState, StepSizes,
                          default_step_sizes)


@pytest.fixture(scope="module")
def lasso_small():
    prob = generate(GeneratorSpec(kind="lasso", n=30, p=12, sparsity=4, lam=0.1,
                                  lam_relative=True, seed=3))
    certify_reference(prob, "pdhg_oracle", 1e-12)
    return prob


def dense_v(M, offsets, steps, probs, dx, dy):
    """Lyapunov form written out with dense matrices."""
    dims = np.diff(offsets)
    P_inv = np.diag(np.repeat(1.0 / probs, dims))
    D_inv = np.diag(np.repeat(1.0 / steps.sigma, dims))
    return (0.5 * dx @ dx / steps.tau + 0.5 * dy @ D_inv @ P_inv @ dy + (M @ dx) @ P_inv @ dy)


def single_block_vector(rng, offsets):
    i = rng.integers(len(offsets) - 1)
    out = np.zeros(offsets[-1])
    out[offsets[i]:offsets[i + 1]] = rng.standard_normal(offsets[i + 1] - offsets[i])
    return out * rng.exponential()


# ----------------------------------------------------------------------
# Bregman distances


def test_bregman_at_anchor_is_zero(lasso_small, rng):
    x = rng.standard_normal(lasso_small.p)
    y = lasso_small.f.conj_prox(rng.standard_normal(lasso_small.m), 1.0)
    assert bregman_dg(x, (x, y), lasso_small) == 0.0
    assert bregman_dfstar(y, (x, y), lasso_small) == 0.0


def test_bregman_zero_g_is_linear(rng):
    M = rng.standard_normal((3, 2))
    prob = SaddleProblem(Zero(), SeparableSum([LeastSquares(np.zeros(3))], [3]),
                         BlockLinearOperator.from_dense(M))
    x, xb, yb = rng.standard_normal(2), rng.standard_normal(2), rng.standard_normal(3)
    assert abs(bregman_dg(x, (xb, yb), prob) - (M.T @ yb) @ (x - xb)) < 1e-13


def test_bregman_nonnegative_at_solution(lasso_small, rng):
    z = (lasso_small.reference.x_star, lasso_small.reference.y_star)
    for _ in range(100):
        x = rng.standard_normal(lasso_small.p) * rng.exponential()
        y = rng.standard_normal(lasso_small.m) * rng.exponential()
        assert bregman_dg(x, z, lasso_small) >= -1e-10
        assert bregman_dfstar(y, z, lasso_small) >= -1e-10


def test_bregman_infinite_off_domain():
    prob = generate(GeneratorSpec(kind="svm_hinge", n=5, p=3, sparsity=0))
    z = (np.zeros(3), np.zeros(5))
    assert bregman_dfstar(np.ones(5), z, prob) == np.inf


# ----------------------------------------------------------------------
# Lyapunov forms


def test_lyapunov_against_dense_oracle(rng):
    M = rng.standard_normal((6, 4))
    offsets = np.array([0, 2, 3, 6])
    A = BlockLinearOperator.from_dense(M, offsets)
    probs = np.array([0.5, 0.2, 0.3])
    steps = default_step_sizes(A, 0.9, SamplerSpec(probs))
    dx, dy, ydiff = rng.standard_normal(4), rng.standard_normal(6), rng.standard_normal(6)
    v = lyapunov_v(dx, dy, steps, A, probs)
    assert abs(v - dense_v(M, offsets, steps, probs, dx, dy)) <= 1e-12 * max(1.0, abs(v))
    # V_k: V at (dx, -ydiff) plus the dual quadratic of dy
    vk = lyapunov_vk(dx, dy, ydiff, steps, A, probs)
    w = np.repeat(1.0 / (steps.sigma * probs), np.diff(offsets))
    oracle = dense_v(M, offsets, steps, probs, dx, -ydiff) + 0.5 * np.sum(w * dy * dy)
    assert abs(vk - oracle) <= 1e-12 * max(1.0, abs(vk))


def test_lyapunov_zero_and_collapse(rng):
    A = BlockLinearOperator.from_dense(np.zeros((3, 2)) + np.eye(3, 2))
    steps = StepSizes(0.3, [0.5, 0.5, 0.5], 0.5)
    assert lyapunov_v(np.zeros(2), np.zeros(3), steps, A) == 0.0
    A0 = BlockLinearOperator.from_dense(np.zeros((3, 2)))
    dx, dy = rng.standard_normal(2), rng.standard_normal(3)
    vk = lyapunov_vk(dx, dy, np.zeros(3), steps, A0)
    assert abs(vk - (0.5 * dx @ dx / 0.3 + 0.5 * 3 * dy @ dy / 0.5)) < 1e-12


@pytest.mark.parametrize("family", ["lasso", "ridge", "constrained", "svm"])
def test_lower_bounds_single_block_differences(family, rng):
    prob = random_problem(family, rng, m=7, p=5, n_blocks=4)
    steps = default_step_sizes(prob.A)
    for _ in range(1000):
        dx = rng.standard_normal(prob.p) * rng.exponential()
        dy = single_block_vector(rng, prob.A.offsets)
        v = lyapunov_v(dx, dy, steps, prob.A)
        assert v >= lower_bound_v(dx, dy, steps, prob.A) - 1e-9 * max(1.0, abs(v))
        dyk = rng.standard_normal(prob.m)
        ydiff = single_block_vector(rng, prob.A.offsets)
        vk = lyapunov_vk(dx, dyk, ydiff, steps, prob.A)
        assert vk >= lower_bound_vk(dx, dyk, ydiff, steps, prob.A) - 1e-9 * max(1.0, abs(vk))


def test_delta0_matches_vk(lasso_small, rng):
    steps = default_step_sizes(lasso_small.A)
    ref = lasso_small.reference
    x0 = rng.standard_normal(lasso_small.p)
    y0 = lasso_small.f.conj_prox(rng.standard_normal(lasso_small.m), 1.0)
    d = delta0(lasso_small, steps, None, x0, y0)
    vk = lyapunov_vk(x0 - ref.x_star, y0 - ref.y_star, np.zeros(lasso_small.m), steps,
                     lasso_small.A)
    assert abs(d - vk) <= 1e-12 * d
    assert delta0(lasso_small, steps, None, ref.x_star, ref.y_star) == 0.0
    assert 0 < delta0(lasso_small, steps) < np.inf


# ----------------------------------------------------------------------
# residuals and gaps


def test_kkt_smooth_closed_form(rng):
    M = rng.standard_normal((5, 3))
    b = rng.standard_normal(5)
    prob = SaddleProblem(SquaredL2(0.8), SeparableSum([LeastSquares(b)], [5]),
                         BlockLinearOperator.from_dense(M))
    x, y = rng.standard_normal(3), rng.standard_normal(5)
    direct = np.sqrt(np.sum((M.T @ y + 0.8 * x) ** 2) + np.sum((M @ x - y - b) ** 2))
    assert abs(kkt_residual(x, y, prob, weighted=False) - direct) <= 1e-12 * direct
    steps = default_step_sizes(prob.A)
    weighted = np.sqrt(np.sum((M.T @ y + 0.8 * x) ** 2) / steps.tau
                       + np.sum((M @ x - y - b) ** 2 / steps.sigma))
    assert abs(kkt_residual(x, y, prob, steps) - weighted) <= 1e-12 * weighted


def test_kkt_detects_non_solutions(lasso_small):
    ref = lasso_small.reference
    assert kkt_residual(ref.x_star, ref.y_star, lasso_small, weighted=False) <= 1e-12
    assert kkt_residual(ref.x_star, 2 * ref.y_star, lasso_small, weighted=False) > 1e-3


def test_kkt_infinite_off_domain():
    prob = generate(GeneratorSpec(kind="svm_hinge", n=5, p=3, sparsity=0))
    assert kkt_residual(np.zeros(3), np.ones(5), prob) == np.inf


def test_gap_at_example():
    prob = SaddleProblem(Zero(), SeparableSum([IndicatorPoint([0.0])], [1]),
                         BlockLinearOperator.from_dense([[1.0]]))
    assert gap_at((np.array([1.0]), np.array([2.0])), (np.array([3.0]), np.array([4.0])),
                  prob) == -2.0


def test_gap_at_saddle_property(lasso_small, rng):
    ref = lasso_small.reference
    z = (ref.x_star, ref.y_star)
    assert abs(gap_at(z, z, lasso_small)) <= 1e-12
    for _ in range(100):
        xb = rng.standard_normal(lasso_small.p)
        yb = lasso_small.f.conj_prox(rng.standard_normal(lasso_small.m), 1.0)
        assert gap_at((xb, yb), z, lasso_small) >= -1e-10


def test_smoothed_gap_zero_at_saddle(lasso_small):
    ref = lasso_small.reference
    z = (ref.x_star, ref.y_star)
    for alpha, beta in [(1.0, 1.0), (0.01, 30.0), (5.0, 0.2)]:
        assert abs(smoothed_gap(z, z, alpha, beta, lasso_small)) <= 1e-10


def test_smoothed_gap_grid_oracle():
    A = BlockLinearOperator.from_dense([[1.5]])
    prob = SaddleProblem(L1(0.5), SeparableSum([LeastSquares([0.3])], [1]), A)
    xb, yb, xh, yh = 0.4, -0.2, 0.1, 0.2
    u = np.linspace(-10, 10, 2001)[:, None]
    v = np.linspace(-10, 10, 2001)[None, :]
    g = lambda t: 0.5 * np.abs(t)
    fs = lambda s: 0.5 * s * s + 0.3 * s
    H = g(xb) + 1.5 * xb * v - fs(v) - g(u) - 1.5 * u * yb + fs(yb)
    oracle = np.max(H - 0.5 * (u - xh) ** 2 - 0.5 * (v - yh) ** 2)
    closed = smoothed_gap((np.array([xb]), np.array([yb])), (np.array([xh]), np.array([yh])),
                          1.0, 1.0, prob)
    assert abs(closed - oracle) <= 1e-3


def test_smoothed_gap_large_beta_pins_dual(lasso_small, rng):
    ref = lasso_small.reference
    xb = rng.standard_normal(lasso_small.p)
    yb = lasso_small.f.conj_prox(rng.standard_normal(lasso_small.m), 1.0)
    xh = np.zeros(lasso_small.p)
    A = lasso_small.A
    # with v = y* fixed, only the primal supremum remains
    u = lasso_small.g.prox(xh - A.full_adjoint(yb), 1.0)
    pinned = gap_at((xb, yb), (u, ref.y_star), lasso_small) - 0.5 * np.sum((u - xh) ** 2)
    val = smoothed_gap((xb, yb), (xh, ref.y_star), 1.0, 1e9, lasso_small)
    assert abs(val - pinned) <= 1e-6 * max(1.0, abs(pinned))
    with pytest.raises(ValueError):
        smoothed_gap((xb, yb), (xh, ref.y_star), 0.0, 1.0, lasso_small)


def test_objective_residual_second_code_path(lasso_small, rng):
    M = lasso_small.A.toarray()
    b, lam = lasso_small.meta["b"], lasso_small.meta["lam"]
    P = lambda x: 0.5 * np.sum((M @ x - b) ** 2) + lam * np.sum(np.abs(x))
    x = rng.standard_normal(lasso_small.p)
    expected = P(x) - P(lasso_small.reference.x_star)
    assert abs(objective_residual(x, lasso_small) - expected) <= 1e-10 * max(1.0, abs(expected))
    assert abs(objective_residual(lasso_small.reference.x_star, lasso_small)) <= 1e-12


def test_feasibility_weights(rng):
    M = rng.standard_normal((4, 3))
    x_feas = rng.standard_normal(3)
    b = M @ x_feas
    prob = SaddleProblem(L1(1.0), SeparableSum([IndicatorPoint(b)], [4]),
                         BlockLinearOperator.from_dense(M), b=b)
    steps = StepSizes(0.1, np.full(4, 4.0), 0.5)  # sigma_i p_i = 1
    x = rng.standard_normal(3)
    assert abs(feasibility(x, prob, True, steps) - feasibility(x, prob)) <= 1e-14
    assert feasibility(x_feas, prob) <= 1e-12
    unconstrained = random_problem("lasso", rng)
    with pytest.raises(ValueError):
        feasibility(x, unconstrained)


def test_dist_to_ref_definitions(rng):
    prob = random_problem("lasso", rng)
    prob.reference = ReferenceSolution(np.array([3.0, 4.0, 0.0, 0.0]), None, 0.0, "test")
    assert dist_to_ref(np.zeros(4), prob) == 1.0
    prob.reference = ReferenceSolution(np.zeros(4), None, 0.0, "test")
    assert dist_to_ref(np.array([0.0, 3.0, 4.0, 0.0]), prob) == 5.0


# ----------------------------------------------------------------------
# theory constants


def test_ce_vanishes_at_trivial_solution():
    A = BlockLinearOperator.from_dense(np.array([[1.0, 2.0], [0.5, -1.0], [2.0, 0.0]]))
    prob = SaddleProblem(SquaredL2(1.0), SeparableSum([LeastSquares(np.zeros(3))], [3]), A)
    prob.reference = ReferenceSolution(np.zeros(2), np.zeros(3), 0.0, "exact")
    ce = theory_constant_ce(prob, default_step_sizes(A))
    assert ce.ce == 0.0 and ce.delta0 == 0.0


def test_ce_single_block_sums_vanish(rng):
    prob = random_problem("ridge", rng, m=4, p=3, n_blocks=2).with_blocks([0, 4])
    certify_reference(prob, "pdhg_oracle", 1e-12)
    ce = theory_constant_ce(prob, default_step_sizes(prob.A))
    assert ce.terms["fstar_y1"] == 0.0 and ce.terms["fstar_ystar"] == 0.0


def test_ce_terms_and_derived_constants(lasso_small):
    steps = default_step_sizes(lasso_small.A)
    ce = theory_constant_ce(lasso_small, steps)
    assert np.isfinite(ce.ce) and ce.ce > 0
    assert abs(sum(ce.terms.values()) - ce.ce) <= 1e-12 * ce.ce
    assert abs(ce.terms["delta0_over_c1"] - ce.delta0 / steps.c1) <= 1e-12 * ce.delta0 / steps.c1
    assert ce.ce1 is None and ce.ce3 is None  # least squares is not Lipschitz; not constrained


def test_ce_requires_initial_dual_in_domain():
    prob = generate(GeneratorSpec(kind="svm_hinge", n=8, p=3, sparsity=0))
    certify_reference(prob, "pdhg_oracle", 1e-10)
    with pytest.raises(ValueError):
        theory_constant_ce(prob, default_step_sizes(prob.A), y0=np.ones(8))
    ce = theory_constant_ce(prob, default_step_sizes(prob.A))
    assert ce.ce1 is not None and ce.ce1 > ce.ce


# ----------------------------------------------------------------------
# rate fitting


def test_rate_fit_exact_exponential():
    k = np.arange(200)
    fit = rate_fit(k, np.exp(-0.1 * k))
    assert abs(fit.slope + 0.1) < 1e-10 and abs(fit.r_squared - 1.0) < 1e-12


def test_rate_fit_constant():
    fit = rate_fit(np.arange(50), np.full(50, 3.0))
    assert fit.slope == 0.0 and fit.r_squared == 1.0


def test_rate_fit_window_drops_head_and_floor():
    k = np.arange(400)
    vals = np.where(k < 20, 1.0, np.exp(-0.2 * k))
    vals = np.maximum(vals, 1e-18)
    fit = rate_fit(k, vals)
    start, stop = fit.window
    assert start >= 20 and stop < 400
    assert abs(fit.slope + 0.2) < 1e-8


def test_rate_fit_errors_and_warnings():
    with pytest.raises(ValueError):
        rate_fit(np.arange(5), np.ones(5))
    k = np.arange(200)
    vals = np.exp(-0.05 * k)
    vals[100] = 0.0  # inside the fit window
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        fit = rate_fit(k, vals)
    assert fit.excluded == 1 and any("excluded" in str(w.message) for w in caught)


# ----------------------------------------------------------------------
# records


def test_metric_validation(lasso_small, rng):
    with pytest.raises(ValueError):
        validate_metric_names(["nope"], lasso_small)
    with pytest.raises(ValueError):
        validate_metric_names(["feasibility"], lasso_small)
    bare = random_problem("lasso", rng)
    with pytest.raises(ValueError):
        validate_metric_names(["dist_to_ref"], bare)
    validate_metric_names(["kkt_residual", "smoothed_gap_avg"], bare)


def test_ergodic_metrics_nan_before_first_iteration(lasso_small):
    st = SolverState.initial(lasso_small, track_ergodic=True)
    steps = default_step_sizes(lasso_small.A)
    out = evaluate_metrics(lasso_small, st, steps, ["objective_residual_avg", "kkt_residual"])
    assert np.isnan(out["objective_residual_avg"]) and np.isfinite(out["kkt_residual"])
    out = evaluate_metrics(lasso_small, st, None, ["lyapunov_V"])
    assert np.isnan(out["lyapunov_V"])
