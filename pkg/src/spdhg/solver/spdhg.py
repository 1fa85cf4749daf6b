"""The SPDHG iteration, its deterministic special case and the strongly convex variant."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import sampling
from . import _kernels
from .steps import default_step_sizes, pdhg_step_sizes, spdhg_mu_step_sizes, DEFAULT_GAMMA
from .types import DivergenceError, InapplicableError, SolverState

__all__ = [
    "RunConfig",
    "RunResult",
    "spdhg_step",
    "primal_update",
    "dual_candidate",
    "run",
    "pdhg_run",
    "spdhg_mu_run",
    "check_sampler_identities",
    "kernel_functions",
    "drive",
]


@dataclass
class RunConfig:
    """Iteration budget, logging cadence and optional stopping rule.

    ``log_every`` counts iterations (``0`` logs only the initial and final
    states).  ``stop_metric`` is evaluated at log points only.
    """

    max_iters: int = 1000
    log_every: int = 0
    stop_metric: str | None = None
    stop_tol: float = 0.0
    metrics: tuple = ("kkt_residual",)
    track_ergodic: bool = False
    x0: np.ndarray | None = None
    y0: np.ndarray | None = None
    sync_every: int | None = None
    log_initial: bool = True

    def anchors(self, problem):
        """Initial point ``(x⁰, y¹)``, the smoothed-gap anchors."""
        x = np.zeros(problem.p) if self.x0 is None else np.asarray(self.x0, dtype=np.float64)
        y = np.zeros(problem.m) if self.y0 is None else np.asarray(self.y0, dtype=np.float64)
        return x, y

    def __post_init__(self):
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.log_every < 0:
            raise ValueError("log_every must be nonnegative")
        self.metrics = tuple(self.metrics)
        if self.stop_metric is not None and self.stop_metric not in self.metrics:
            self.metrics = self.metrics + (self.stop_metric,)


@dataclass
class RunResult:
    """Final state plus the list of ``ConvergenceRecord`` entries."""

    state: SolverState
    log: list
    method: str = "spdhg"
    steps: object = None
    stopped: bool = False
    meta: dict = field(default_factory=dict)

    def series(self, metric):
        return np.array([rec.metrics.get(metric, np.nan) for rec in self.log])

    @property
    def epochs(self):
        return np.array([rec.epoch for rec in self.log])


# ----------------------------------------------------------------------
# reference (pure numpy) iteration


def primal_update(state, problem, steps):
    """``prox_{τg}(x - τ A^T ȳ)`` from the cached ``A^T ȳ``."""
    return problem.g.prox(state.x - steps.tau * state.aty_bar, steps.tau)


def dual_candidate(problem, steps, x, y):
    """Full candidate ``ŷ_i = prox_{σ_i f_i*}(y_i + σ_i A_i x)`` for every block."""
    A = problem.A
    out = np.empty(A.m)
    for i in range(A.n):
        sl = slice(A.offsets[i], A.offsets[i + 1])
        si = steps.sigma[i]
        out[sl] = problem.f_block(i).conj_prox(y[sl] + si * A.block_apply(i, x), si)
    return out


def spdhg_step(state, problem, steps, sampler, block=None, sync_every=None):
    """One SPDHG iteration, in place; returns the drawn block.

    ``block`` overrides the sampler (used by the enumeration checks); the
    stream counter advances either way.
    """
    A = problem.A
    x = primal_update(state, problem, steps)
    i = sampling.draw(sampler, state.rng_counter) if block is None else int(block)
    sl = slice(A.offsets[i], A.offsets[i + 1])
    si = steps.sigma[i]
    y_hat = problem.f_block(i).conj_prox(state.y[sl] + si * A.block_apply(i, x), si)
    delta = A.adjoint_block_apply(i, y_hat - state.y[sl])
    state.y_prev = state.y.copy()
    state.y[sl] = y_hat
    state.x = x
    state.k += 1
    state.rng_counter += 1
    if sync_every is None:
        sync_every = max(1, A.n)
    if sync_every > 0 and state.k % sync_every == 0:
        state.aty = A.full_adjoint(state.y)
    else:
        state.aty = state.aty + delta
    state.aty_bar = state.aty + (steps.theta / sampler.probs[i]) * delta
    if state.ergodic is not None:
        state.ergodic.add(state.x, state.y)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y_hat))):
        raise DivergenceError(state.k)
    return i


# ----------------------------------------------------------------------
# compiled driver


def kernel_functions(problem):
    """Per-coordinate parameter arrays of ``g`` and ``f`` for the kernels."""
    try:
        gpar = problem.g.kernel_params(problem.p)
        fpar = problem.f.kernel_params(problem.m)
    except NotImplementedError as exc:
        raise InapplicableError(f"no compiled form: {exc}") from exc
    return gpar, fpar


def _evaluate(problem, state, steps, config, probs):
    from ..diagnostics.records import ConvergenceRecord, evaluate_metrics

    values = evaluate_metrics(problem, state, steps, config.metrics, probs,
                              anchors=config.anchors(problem))
    return ConvergenceRecord(state.k, state.k / problem.n, values)


def _stop(record, config):
    if config.stop_metric is None:
        return False
    val = record.metrics.get(config.stop_metric, np.nan)
    return bool(np.isfinite(val) and val <= config.stop_tol)


def drive(problem, steps, config, advance, state, method, epoch_of=None, probs=None):
    """Shared logging loop: ``advance(state, count)`` performs ``count`` iterations.

    ``epoch_of(state)`` overrides the default epoch count ``k / n``.
    """
    from ..diagnostics.records import validate_metric_names

    validate_metric_names(config.metrics, problem)
    log = []
    record = None

    def snap():
        rec = _evaluate(problem, state, steps, config, probs)
        if epoch_of is not None:
            rec.epoch = float(epoch_of(state))
        log.append(rec)
        return rec

    if config.log_initial or config.max_iters == 0:
        if config.max_iters == 0:
            return RunResult(state, [], method, steps)
        record = snap()
        if _stop(record, config):
            return RunResult(state, log, method, steps, True)
    target = config.max_iters
    chunk = config.log_every if config.log_every > 0 else target
    stopped = False
    while state.k < target:
        count = min(chunk - state.k % chunk if config.log_every > 0 else target - state.k,
                    target - state.k)
        try:
            advance(state, count)
        except DivergenceError as exc:
            exc.log = log
            raise
        if state.k % chunk == 0 or state.k == target:
            record = snap()
            if _stop(record, config):
                stopped = True
                break
    return RunResult(state, log, method, steps, stopped)


def _spdhg_advance(problem, steps, sampler, sync_every):
    A = problem.A
    (gk, gb, gc, gs, gl), (fk, fb, fc, fs, fl) = kernel_functions(problem)
    sigma = np.ascontiguousarray(steps.sigma, dtype=np.float64)
    inv_p = 1.0 / sampler.probs
    aux = {}

    def advance(state, count):
        if "dy" not in aux:
            aux["dy"] = state.y - state.y_prev
            nz = np.flatnonzero(aux["dy"])
            owner = A.block_of_row()
            blk = owner[nz[0]] if nz.size else -1
            if nz.size and np.any(owner[nz] != blk):
                # y_prev differs on several blocks: kernel bookkeeping needs one
                state.y_prev = state.y.copy()
                aux["dy"][:] = 0.0
                blk = -1
            aux["last"] = np.array([blk], dtype=np.int64)
        erg = state.ergodic
        track = erg is not None
        if track:
            sum_x, sum_y = erg.sum_x, erg.sum_y
            stamp = np.full(A.m, state.k, dtype=np.int64)
        else:
            sum_x, sum_y, stamp = np.empty(0), np.empty(0), np.empty(0, dtype=np.int64)
        blocks = sampling.draws(sampler, state.rng_counter, count)
        bad = _kernels.spdhg_loop(
            state.x, state.y, state.y_prev, state.aty, state.aty_bar, aux["dy"], aux["last"],
            A.indptr, A.indices, A.data, A.offsets,
            gk, gb, gc, gs, gl, fk, fb, fc, fs, fl,
            steps.tau, sigma, inv_p, steps.theta, blocks, state.k, sync_every,
            track, sum_x, sum_y, stamp)
        done = count if bad == _kernels.OK else bad + 1
        state.rng_counter += done
        if track:
            _kernels.flush_y_sum(state.y, sum_y, stamp, state.k + done)
            erg.count += done
        state.k += done
        if bad != _kernels.OK:
            raise DivergenceError(state.k)

    return advance


def run(problem, steps=None, sampler=None, config=None, state=None, method="spdhg"):
    """Iterate SPDHG, logging a ``ConvergenceRecord`` every ``log_every`` steps.

    Parameters
    ----------
    problem : SaddleProblem
    steps : StepSizes, optional
        Defaults to ``default_step_sizes`` for ``sampler``.
    sampler : SamplerSpec, optional
        Uniform with seed 0 when omitted.
    config : RunConfig, optional
    state : SolverState, optional
        Resume from this state (modified in place).

    Returns
    -------
    RunResult

    Raises
    ------
    DivergenceError
        When an iterate becomes non-finite.
    """
    config = RunConfig() if config is None else config
    sampler = sampling.uniform(problem.n) if sampler is None else sampler
    if sampler.n != problem.n:
        raise ValueError("sampler and problem disagree on the number of blocks")
    steps = default_step_sizes(problem.A, DEFAULT_GAMMA, sampler) if steps is None else steps
    if steps.sigma.size != problem.n:
        raise ValueError("one dual step per block is required")
    if state is None:
        state = SolverState.initial(problem, config.x0, config.y0, config.track_ergodic)
    sync = max(1, problem.n) if config.sync_every is None else int(config.sync_every)
    advance = _spdhg_advance(problem, steps, sampler, sync)
    result = drive(problem, steps, config, advance, state, method, probs=sampler.probs)
    result.meta["seed"] = sampler.seed
    return result


def pdhg_run(problem, steps=None, config=None, gamma=DEFAULT_GAMMA):
    """Deterministic PDHG: SPDHG on the single-block view of ``problem``."""
    single = problem.single_block() if problem.n > 1 else problem
    steps = pdhg_step_sizes(single.A, gamma) if steps is None else steps
    return run(single, steps, sampling.uniform(1), config, method="pdhg")


def strong_convexity_constants(problem):
    """``(mu_i, mu_g)`` from function metadata (``None`` entries when unknown)."""
    mu_f = [problem.f_block(i).conj_strong_convexity for i in range(problem.n)]
    return mu_f, problem.g.strong_convexity


def spdhg_mu_run(problem, mu_f=None, mu_g=None, config=None, sampler=None,
                 gamma=DEFAULT_GAMMA):
    """SPDHG with the strongly convex step sizes and ``θ < 1`` extrapolation.

    Raises
    ------
    InapplicableError
        When ``g`` or some ``f_i*`` is not known to be strongly convex.
    """
    sampler = sampling.uniform(problem.n) if sampler is None else sampler
    meta_f, meta_g = strong_convexity_constants(problem)
    mu_f = meta_f if mu_f is None else mu_f
    mu_g = meta_g if mu_g is None else mu_g
    if mu_g is None or any(m is None for m in np.atleast_1d(np.asarray(mu_f, dtype=object))):
        raise InapplicableError("strong convexity constants are missing from the function metadata")
    steps = spdhg_mu_step_sizes(problem.A, np.asarray(mu_f, dtype=np.float64), float(mu_g),
                                sampler, gamma)
    return run(problem, steps, sampler, config, method="spdhg_mu")


def check_sampler_identities(state, problem, steps, sampler, Y=None, exact=True, **kw):
    """Sampling identities for the next dual update from ``state``.

    Builds ``x^{k+1}`` and the full candidate ``ŷ`` without advancing the
    state and hands them to ``sampling.check_expectation_identities``.
    """
    x_next = primal_update(state, problem, steps)
    y_hat = dual_candidate(problem, steps, x_next, state.y)
    A = problem.A
    return sampling.check_expectation_identities(
        state.y, y_hat, steps.sigma_rows(A), np.repeat(sampler.probs, A.block_dims),
        A.offsets, sampler.probs, Y=Y, exact=exact, **kw)
