"""Per-iteration property checks with exact conditional expectations.

At every iteration the next dual update is enumerated over all blocks with
their probabilities, which makes the one-step descent inequality, the
quadratic lower bounds and the sampling identities checkable to rounding
precision.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .. import sampling
from ..diagnostics import measures
from ..solver import (SolverState, default_step_sizes, dual_candidate, primal_update, spdhg_step,
                      validate_step_sizes)
from ..solver.types import DivergenceError

__all__ = ["CheckReport", "check_properties", "check_function_calculus", "random_domain_point",
           "descent_slack", "MAX_BLOCKS"]

MAX_BLOCKS = 8


@dataclass
class CheckReport:
    """Counts per check family plus the first violation (with a state dump)."""

    passed: bool = True
    counts: dict = field(default_factory=dict)
    worst: dict = field(default_factory=dict)
    first_failure: dict | None = None
    warnings: list = field(default_factory=list)

    def record(self, name, value, ok, dump=None):
        self.counts[name] = self.counts.get(name, 0) + 1
        self.worst[name] = min(self.worst.get(name, np.inf), float(value))
        if not ok:
            self.passed = False
            if self.first_failure is None:
                self.first_failure = {"check": name, "value": float(value), **(dump or {})}

    def summary(self):
        lines = []
        for name in sorted(self.counts):
            lines.append(f"{name}: {self.counts[name]} checks, worst margin {self.worst[name]:.3e}")
        lines += [f"warning: {w}" for w in self.warnings]
        if self.first_failure is not None:
            ff = self.first_failure
            lines.append(f"FIRST FAILURE: {ff['check']} (margin {ff['value']:.3e}) at iteration "
                         f"{ff.get('iteration', '?')}")
        lines.append("PASS" if self.passed else "FAIL")
        return "\n".join(lines)


def random_domain_point(fn, dim, rng, scale=1.0, conj=False):
    """A random point of ``dom f`` (or ``dom f*``) obtained through a prox."""
    v = scale * rng.standard_normal(dim)
    return fn.conj_prox(v, 1.0) if conj else fn.prox(v, 1.0)


def descent_slack(problem, steps, probs, x_prev, y_k, y_km1, x_k, y_hat, z):
    """Right minus left side of the one-step descent inequality at ``z``.

    ``x_prev = x^{k-1}``, ``y_k = y^k``, ``y_km1 = y^{k-1}`` and
    ``x_k = x^k``; ``y_hat`` is the full dual candidate.  The expectation
    over the drawn block is computed exactly.
    """
    A = problem.A
    x, y = z
    lhs = measures.bregman_dg(x_k, z, problem) + measures.bregman_dfstar(y_hat, z, problem)
    vk = measures.lyapunov_vk(x_prev - x, y_k - y, y_k - y_km1, steps, A, probs)
    e_next = 0.0
    for i in range(A.n):
        sl = A.block_rows(i)
        y_next = y_k.copy()
        y_next[sl] = y_hat[sl]
        e_next += probs[i] * measures.lyapunov_vk(x_k - x, y_next - y, y_next - y_k, steps, A,
                                                  probs)
    v_step = measures.lyapunov_v(x_k - x_prev, y_k - y_km1, steps, A, probs)
    rhs = vk - e_next - v_step
    scale = max(1.0, abs(lhs), abs(vk), abs(e_next), abs(v_step))
    return rhs - lhs, scale


def _single_block(A, rng, scale=1.0):
    i = int(rng.integers(A.n))
    out = np.zeros(A.m)
    sl = A.block_rows(i)
    out[sl] = scale * rng.standard_normal(sl.stop - sl.start)
    return out


def check_lyapunov_bounds(problem, steps, probs, rng, report, count=1000, tol=1e-9):
    """The lower bounds on ``V`` and ``V_k`` for random inputs.

    The dual differences are supported on a single block, as every
    difference of consecutive iterates is.
    """
    A = problem.A
    for _ in range(count):
        dx = rng.standard_normal(A.p) * rng.exponential()
        dy = _single_block(A, rng, rng.exponential())
        v = measures.lyapunov_v(dx, dy, steps, A, probs)
        lb = measures.lower_bound_v(dx, dy, steps, A, probs)
        report.record("lower_bound_V", v - lb + tol * max(1.0, abs(v)), v - lb >= -tol * max(1.0, abs(v)))
        dyk = rng.standard_normal(A.m) * rng.exponential()
        ydiff = _single_block(A, rng, rng.exponential())
        vk = measures.lyapunov_vk(dx, dyk, ydiff, steps, A, probs)
        lbk = measures.lower_bound_vk(dx, dyk, ydiff, steps, A, probs)
        report.record("lower_bound_Vk", vk - lbk + tol * max(1.0, abs(vk)),
                      vk - lbk >= -tol * max(1.0, abs(vk)))


def check_function_calculus(fn, dim, rng, report, trials=20, tol=1e-9, label="f"):
    """Moreau decomposition, prox optimality and Fenchel-Young equality at prox pairs."""
    for _ in range(trials):
        v = 3.0 * rng.standard_normal(dim)
        t = float(rng.uniform(0.1, 3.0))
        u = fn.prox(v, t)
        w = fn.conj_prox(v / t, 1.0 / t)
        moreau = float(np.max(np.abs(u + t * w - v)))
        report.record(f"moreau[{label}]", -moreau, moreau <= tol * max(1.0, np.max(np.abs(v))))
        grad = (v - u) / t
        opt = fn.subdiff_dist(u, grad)
        report.record(f"prox_optimality[{label}]", -opt, opt <= tol * max(1.0, np.max(np.abs(v))))
        fy = fn.value(u) + fn.conj_value(grad) - float(u @ grad)
        report.record(f"fenchel_young[{label}]", -abs(fy),
                      abs(fy) <= tol * max(1.0, abs(fn.value(u)), abs(float(u @ grad))))


def check_properties(problem, iters=200, seed=0, steps=None, n_random_z=5, tol=1e-9,
                     identity_tol=1e-10, lyapunov_samples=1000, monte_carlo=False,
                     mc_draws=100_000):
    """Run SPDHG from zero and check every iteration.

    Checks the one-step descent inequality at ``z*`` (when a reference is
    attached) and at ``n_random_z`` random domain points, the lower bounds
    on ``V``/``V_k`` (skipped with a warning when the step sizes violate the
    step condition), the exact sampling identities, and the function
    calculus of ``g`` and every ``f_i``.  With ``monte_carlo`` the
    identities are also checked once by sampling ``mc_draws`` blocks.

    Divergence is tolerated when the step sizes are invalid.
    """
    if problem.n > MAX_BLOCKS:
        raise ValueError(f"exact enumeration needs n <= {MAX_BLOCKS} blocks, got {problem.n}")
    rng = np.random.default_rng(seed)
    sampler = sampling.uniform(problem.n, seed)
    probs = sampler.probs
    steps = default_step_sizes(problem.A) if steps is None else steps
    report = CheckReport()
    valid = validate_step_sizes(steps, problem.A, sampler)
    if not valid.passed or steps.c1 <= 0:
        msg = f"step condition violated ({valid}); lower-bound checks skipped"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        report.warnings.append(msg)

    check_function_calculus(problem.g, problem.p, rng, report, label="g")
    for i in range(problem.n):
        check_function_calculus(problem.f_block(i), int(problem.A.block_dims[i]), rng, report,
                                label=f"f{i}")
    if valid.passed:
        check_lyapunov_bounds(problem, steps, probs, rng, report, lyapunov_samples, tol)

    ref = problem.reference
    anchors = []
    if ref is not None and ref.y_star is not None:
        anchors.append(("z*", (ref.x_star, ref.y_star)))
    for j in range(n_random_z):
        anchors.append((f"z_rand{j}", (random_domain_point(problem.g, problem.p, rng),
                                       random_domain_point(problem.f, problem.m, rng, conj=True))))

    state = SolverState.initial(problem)
    A = problem.A
    for k in range(iters):
        x_prev, y_k, y_km1 = state.x.copy(), state.y.copy(), state.y_prev.copy()
        x_k = primal_update(state, problem, steps)
        y_hat = dual_candidate(problem, steps, x_k, y_k)
        dump = {"iteration": k + 1, "x_prev": x_prev.tolist(), "y": y_k.tolist(),
                "y_prev": y_km1.tolist()}
        for name, z in anchors:
            slack, scale = descent_slack(problem, steps, probs, x_prev, y_k, y_km1, x_k, y_hat, z)
            report.record(f"descent[{name}]", slack, slack >= -tol * scale, dump)
        if valid.passed:
            dx, dyk = x_k - x_prev, y_k - y_km1
            v = measures.lyapunov_v(dx, dyk, steps, A, probs)
            lb = measures.lower_bound_v(dx, dyk, steps, A, probs)
            report.record("lower_bound_V_iterates", v - lb, v - lb >= -tol * max(1.0, abs(v)), dump)
        ident = sampling.check_expectation_identities(
            y_k, y_hat, steps.sigma_rows(A), np.repeat(probs, A.block_dims), A.offsets, probs,
            Y=anchors[0][1][1] if anchors else None, exact=True, tol=identity_tol)
        worst = max(ident.errors.values())
        report.record("sampler_identities_exact", -worst, ident.passed, dump)
        if monte_carlo and k == iters // 2:
            mc = sampling.check_expectation_identities(
                y_k, y_hat, steps.sigma_rows(A), np.repeat(probs, A.block_dims), A.offsets, probs,
                exact=False, n_draws=mc_draws, seed=seed)
            report.record("sampler_identities_mc", -max(mc.errors.values()), mc.passed, dump)
        try:
            spdhg_step(state, problem, steps, sampler)
        except DivergenceError as exc:
            if valid.passed:
                report.record("finite_iterates", -1.0, False, {"iteration": exc.iteration})
            else:
                report.warnings.append(f"diverged at iteration {exc.iteration} (invalid steps)")
            break
        if not valid.passed and not np.all(np.isfinite(state.x)):
            break
    return report
