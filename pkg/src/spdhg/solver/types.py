"""Data types shared by the solvers and the diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..funcs import IndicatorPoint, ProxableFunction, SeparableSum
from ..linops import BlockLinearOperator, DimensionError

__all__ = [
    "SaddleProblem",
    "ReferenceSolution",
    "StepSizes",
    "ErgodicAccumulator",
    "SolverState",
    "DivergenceError",
    "InapplicableError",
]


class DivergenceError(RuntimeError):
    """A non-finite iterate appeared."""

    def __init__(self, iteration, message=None):
        self.iteration = int(iteration)
        self.log = []
        super().__init__(message or f"non-finite iterate at iteration {iteration}")


class InapplicableError(ValueError):
    """The requested method does not apply to this problem form."""


@dataclass
class ReferenceSolution:
    """A certified (or candidate) primal-dual solution."""

    x_star: np.ndarray
    y_star: np.ndarray | None
    objective_star: float
    provenance: str
    kkt: float = float("nan")

    def save(self, path):
        np.savez(path, x_star=self.x_star,
                 y_star=self.y_star if self.y_star is not None else np.empty(0),
                 has_y=self.y_star is not None, objective_star=self.objective_star,
                 provenance=self.provenance, kkt=self.kkt)

    @classmethod
    def load(cls, path):
        with np.load(path, allow_pickle=False) as data:
            y = data["y_star"] if bool(data["has_y"]) else None
            return cls(data["x_star"].copy(), None if y is None else y.copy(),
                       float(data["objective_star"]), str(data["provenance"]), float(data["kkt"]))


@dataclass
class SaddleProblem:
    """``min_x sum_i f_i(A_i x) + g(x)`` with blockwise-separable ``f``.

    ``b`` is set when ``f`` is the indicator of ``{b}`` (equality constraints);
    ``reference`` optionally holds a solution used by the diagnostics.
    """

    g: ProxableFunction
    f: SeparableSum
    A: BlockLinearOperator
    b: np.ndarray | None = None
    reference: ReferenceSolution | None = None
    name: str = "problem"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not isinstance(self.f, SeparableSum):
            self.f = SeparableSum.single(self.f, self.A.m)
        if self.f.dim != self.A.m:
            raise DimensionError(f"f has dimension {self.f.dim} but A has {self.A.m} rows")
        if self.b is not None:
            self.b = np.asarray(self.b, dtype=np.float64)
            if self.b.shape != (self.A.m,):
                raise DimensionError("constraint vector b must match the row count")
            if not all(isinstance(pc, IndicatorPoint) for pc in self.f.pieces):
                raise ValueError("b given but f is not an indicator of a point")
        self._block_fns = {}

    @property
    def n(self):
        return self.A.n

    @property
    def p(self):
        return self.A.p

    @property
    def m(self):
        return self.A.m

    @property
    def constrained(self):
        return self.b is not None

    def f_block(self, i):
        fn = self._block_fns.get(i)
        if fn is None:
            fn = self.f.restrict_range(self.A.offsets[i], self.A.offsets[i + 1])
            self._block_fns[i] = fn
        return fn

    def objective(self, x):
        """``P(x) = f(Ax) + g(x)`` (``inf`` when ``Ax`` is off ``dom f``)."""
        return self.f.value(self.A.full_apply(x)) + self.g.value(x)

    def with_blocks(self, block_offsets):
        """Same problem with a different row partition."""
        return SaddleProblem(self.g, self.f, self.A.regroup(block_offsets), self.b,
                             self.reference, self.name, dict(self.meta))

    def single_block(self):
        return SaddleProblem(self.g, self.f, self.A.as_single_block(), self.b,
                             self.reference, self.name, dict(self.meta))


@dataclass(frozen=True)
class StepSizes:
    """Primal step ``tau``, per-block dual steps ``sigma``, and ``gamma``.

    ``theta`` scales the dual extrapolation; it is 1 for plain SPDHG.
    """

    tau: float
    sigma: np.ndarray
    gamma: float
    theta: float = 1.0

    def __post_init__(self):
        sigma = np.atleast_1d(np.asarray(self.sigma, dtype=np.float64)).copy()
        sigma.setflags(write=False)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "gamma", float(self.gamma))
        if not self.tau > 0 or not np.all(sigma > 0) or not np.all(np.isfinite(sigma)):
            raise ValueError("step sizes must be positive and finite")

    @property
    def c1(self):
        return 1.0 - self.gamma

    def sigma_rows(self, A):
        return np.repeat(self.sigma, A.block_dims)

    def to_dict(self):
        return {"tau": self.tau, "sigma": self.sigma.tolist(), "gamma": self.gamma,
                "theta": self.theta}


@dataclass
class ErgodicAccumulator:
    """Running sums for ``x_av^K = (1/K) sum_{k=1}^K x^k`` and ``y_av^{K+1}``."""

    sum_x: np.ndarray
    sum_y: np.ndarray
    count: int = 0

    @classmethod
    def zeros(cls, p, m):
        return cls(np.zeros(p), np.zeros(m), 0)

    def add(self, x, y):
        self.sum_x += x
        self.sum_y += y
        self.count += 1

    @property
    def x_avg(self):
        return self.sum_x / self.count if self.count else np.full_like(self.sum_x, np.nan)

    @property
    def y_avg(self):
        return self.sum_y / self.count if self.count else np.full_like(self.sum_y, np.nan)

    def copy(self):
        return ErgodicAccumulator(self.sum_x.copy(), self.sum_y.copy(), self.count)


@dataclass
class SolverState:
    """Iterates after ``k`` completed iterations.

    Holds ``x = x^k``, ``y = y^{k+1}``, ``y_prev = y^k``, ``aty = A^T y`` and
    ``aty_bar = A^T ȳ^{k+1}``.  ``ȳ`` itself is never stored.
    """

    x: np.ndarray
    y: np.ndarray
    y_prev: np.ndarray
    aty: np.ndarray
    aty_bar: np.ndarray
    k: int = 0
    ergodic: ErgodicAccumulator | None = None
    rng_counter: int = 0

    @classmethod
    def initial(cls, problem, x0=None, y0=None, track_ergodic=False):
        A = problem.A
        x = np.zeros(A.p) if x0 is None else np.array(x0, dtype=np.float64)
        y = np.zeros(A.m) if y0 is None else np.array(y0, dtype=np.float64)
        if x.shape != (A.p,) or y.shape != (A.m,):
            raise DimensionError("initial point has wrong dimensions")
        aty = A.full_adjoint(y) if np.any(y) else np.zeros(A.p)
        erg = ErgodicAccumulator.zeros(A.p, A.m) if track_ergodic else None
        return cls(x, y, y.copy(), aty, aty.copy(), 0, erg, 0)

    def copy(self):
        return SolverState(self.x.copy(), self.y.copy(), self.y_prev.copy(), self.aty.copy(),
                           self.aty_bar.copy(), self.k,
                           None if self.ergodic is None else self.ergodic.copy(), self.rng_counter)
