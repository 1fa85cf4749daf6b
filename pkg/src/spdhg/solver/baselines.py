"""Comparison methods: coordinate Vu-Condat, Prox-SVRG and SDCA.

All three log in the same ``ConvergenceRecord`` schema as SPDHG.  Epochs
count expected passes over the data: ``n`` block updates (or ``n``
component gradients) make one epoch.
"""

from __future__ import annotations

import numpy as np

from .. import sampling
from ..funcs import Hinge, LeastSquares, SquaredL2
from . import _kernels
from .spdhg import RunConfig, drive, kernel_functions
from .steps import DEFAULT_GAMMA, fb_vc_cd_step_sizes
from .types import DivergenceError, InapplicableError, SolverState

__all__ = ["fb_vc_cd_run", "svrg_run", "sdca_run"]


def _pieces_of(problem, cls):
    return all(isinstance(pc, cls) for pc in problem.f.pieces)


def fb_vc_cd_run(problem, config=None, sampler=None, steps=None, gamma=DEFAULT_GAMMA):
    """Randomised dual-coordinate Vu-Condat (forward-backward) iteration.

    ``x⁺ = prox_{τg}(x - τ A^T y)`` followed by
    ``y_i = prox_{σ_i f_i*}(y_i + σ_i A_i(2x⁺ - x))`` on one random block.
    Step sizes default to ``fb_vc_cd_step_sizes``.
    """
    config = RunConfig() if config is None else config
    sampler = sampling.uniform(problem.n) if sampler is None else sampler
    steps = fb_vc_cd_step_sizes(problem.A, gamma) if steps is None else steps
    A = problem.A
    (gk, gb, gc, gs, gl), (fk, fb, fc, fs, fl) = kernel_functions(problem)
    sync = max(1, problem.n) if config.sync_every is None else int(config.sync_every)
    sigma = np.ascontiguousarray(steps.sigma, dtype=np.float64)
    state = SolverState.initial(problem, config.x0, config.y0, False)
    x_old = state.x.copy()

    def advance(st, count):
        blocks = sampling.draws(sampler, st.rng_counter, count)
        st.y_prev = st.y.copy()
        bad = _kernels.fbvccd_loop(st.x, x_old, st.y, st.aty, A.indptr, A.indices, A.data,
                                   A.offsets, gk, gb, gc, gs, gl, fk, fb, fc, fs, fl,
                                   steps.tau, sigma, blocks, st.k, sync)
        done = count if bad == _kernels.OK else bad + 1
        st.k += done
        st.rng_counter += done
        st.aty_bar[:] = st.aty
        if bad != _kernels.OK:
            raise DivergenceError(st.k)

    result = drive(problem, steps, config, advance, state, "fb_vc_cd", probs=sampler.probs)
    result.meta["seed"] = sampler.seed
    return result


def svrg_run(problem, config=None, seed=0, step=None, inner=None):
    """Prox-SVRG on ``min_x sum_i 1/2 ||A_i x - b_i||^2 + g(x)``.

    Each outer loop computes the full gradient at the snapshot (one epoch)
    and then takes ``inner`` (default ``2n``) variance-reduced proximal
    steps with ``n A_i^T(A_i x - b_i)`` as the component gradient, sampled
    uniformly.  The step defaults to ``0.1 / max_i (n ||A_i||^2)``.
    ``config.max_iters`` counts inner steps; the state's dual slot holds
    ``∇f(Ax) = Ax - b``.
    """
    if not _pieces_of(problem, LeastSquares):
        raise InapplicableError("SVRG baseline needs a least-squares data term")
    config = RunConfig() if config is None else config
    A, g, n = problem.A, problem.g, problem.n
    b = np.concatenate([pc.b if pc.b.size > 1 else np.full(d, pc.b[0])
                        for pc, d in zip(problem.f.pieces, problem.f.dims)])
    L_max = n * float(np.max(A.block_norms() ** 2))
    eta = 0.1 / L_max if step is None else float(step)
    m_inner = 2 * n if inner is None else int(inner)
    sampler = sampling.uniform(n, seed)
    state = SolverState.initial(problem, config.x0, None, False)
    offs = A.offsets
    grad_evals = [0]

    def resid_block(i, x):
        return A.block_apply(i, x) - b[offs[i]:offs[i + 1]]

    def sync_dual(st):
        st.y_prev = st.y
        st.y = A.full_apply(st.x) - b
        st.aty = A.full_adjoint(st.y)
        st.aty_bar = st.aty.copy()

    snap = {"x": None, "mu": None, "left": 0}

    def advance(st, count):
        for _ in range(count):
            if snap["left"] == 0:
                snap["x"] = st.x.copy()
                snap["mu"] = A.full_adjoint(A.full_apply(st.x) - b)
                snap["left"] = m_inner
                grad_evals[0] += n
            i = sampling.draw(sampler, st.rng_counter)
            st.rng_counter += 1
            gi = A.adjoint_block_apply(i, resid_block(i, st.x) - resid_block(i, snap["x"]))
            v = n * gi + snap["mu"]
            st.x = g.prox(st.x - eta * v, eta)
            snap["left"] -= 1
            grad_evals[0] += 1
            st.k += 1
            if not np.all(np.isfinite(st.x)):
                raise DivergenceError(st.k)
        sync_dual(st)

    sync_dual(state)
    result = drive(problem, None, config, advance, state, "svrg",
                   epoch_of=lambda st: grad_evals[0] / n)
    result.meta.update(seed=seed, step=eta, inner=m_inner)
    return result


def sdca_run(problem, config=None, seed=0):
    """Stochastic dual coordinate ascent for ``sum_r f_r(a_r x) + λ/2 ||x||^2``.

    Requires ``g = SquaredL2(λ)`` and a least-squares or hinge data term.
    Each iteration maximises the dual exactly over the rows of one uniformly
    drawn block (row by row) and keeps ``x = -A^T y / λ``.
    """
    g = problem.g
    if not isinstance(g, SquaredL2) or g.lam <= 0:
        raise InapplicableError("SDCA baseline needs g = lam/2 ||x||^2 with lam > 0")
    if _pieces_of(problem, LeastSquares):
        kind = "ls"
    elif _pieces_of(problem, Hinge):
        kind = "hinge"
    else:
        raise InapplicableError("SDCA baseline needs a least-squares or hinge data term")
    config = RunConfig() if config is None else config
    A, n, lam = problem.A, problem.n, g.lam
    per_row = [pc.kernel_params(d) for pc, d in zip(problem.f.pieces, problem.f.dims)]
    _, b, c, s, _ = (np.concatenate(a) for a in zip(*per_row))
    csr = A.csr
    row_sq = np.asarray(csr.multiply(csr).sum(axis=1)).ravel()
    sampler = sampling.uniform(n, seed)
    y0 = None if config.y0 is None else np.asarray(config.y0, dtype=np.float64)
    state = SolverState.initial(problem, None, y0, False)
    state.x = -state.aty / lam
    indptr, indices, data = A.indptr, A.indices, A.data

    def advance(st, count):
        st.y_prev = st.y.copy()
        for _ in range(count):
            i = sampling.draw(sampler, st.rng_counter)
            st.rng_counter += 1
            for r in range(A.offsets[i], A.offsets[i + 1]):
                nrm = row_sq[r]
                if nrm == 0.0:
                    continue
                cols = indices[indptr[r]:indptr[r + 1]]
                vals = data[indptr[r]:indptr[r + 1]]
                ax = float(vals @ st.x[cols])
                if kind == "ls":
                    d = (ax - b[r] - st.y[r]) / (1.0 + nrm / lam)
                else:
                    z = np.clip(s[r] * (st.y[r] + lam * (ax - s[r]) / nrm), -c[r], 0.0)
                    d = s[r] * z - st.y[r]
                if d != 0.0:
                    st.y[r] += d
                    st.aty[cols] += vals * d
                    st.x[cols] -= vals * d / lam
            st.k += 1
            if st.k % n == 0:
                st.aty = A.full_adjoint(st.y)
                st.x = -st.aty / lam
            if not np.all(np.isfinite(st.x)):
                raise DivergenceError(st.k)
        st.aty_bar = st.aty.copy()

    result = drive(problem, None, config, advance, state, "sdca")
    result.meta["seed"] = seed
    return result
