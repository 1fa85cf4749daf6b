"""Synthetic test problems: basis pursuit, Lasso, ridge and hinge-loss SVM."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy import sparse

from ..funcs import L1, Hinge, IndicatorPoint, LeastSquares, SeparableSum, SquaredL2
from ..linops import BlockLinearOperator
from ..solver.types import SaddleProblem

__all__ = ["GeneratorSpec", "KINDS", "gen_basis_pursuit", "gen_regression", "gen_svm",
           "generate", "ar1_covariance", "problem_from_data"]

KINDS = ("basis_pursuit", "lasso", "ridge", "svm_hinge")

#: variance of the additive noise on regression targets
NOISE_VARIANCE = 0.01


@dataclass(frozen=True)
class GeneratorSpec:
    """Parameters of a synthetic instance.

    ``n`` is the number of data rows and ``p`` the number of features.
    With ``lam_relative`` the regularization weight is ``lam`` times
    ``||A^T b||_inf``.  ``block_size`` rows form one dual block.
    """

    kind: str = "basis_pursuit"
    n: int = 100
    p: int = 200
    rho: float = 0.5
    sparsity: int = 20
    lam: float = 0.1
    seed: int = 0
    block_size: int = 1
    margin: float = 1.0
    lam_relative: bool = False
    noise_variance: float = NOISE_VARIANCE

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown problem kind {self.kind!r}; choose from {KINDS}")
        if self.n < 1 or self.p < 1:
            raise ValueError("n and p must be positive")
        if not 0.0 <= self.rho < 1.0:
            raise ValueError("rho must lie in [0, 1)")
        if not 0 <= self.sparsity <= self.p:
            raise ValueError("sparsity must lie in [0, p]")
        if self.lam < 0:
            raise ValueError("lam must be nonnegative")
        if self.kind in ("ridge", "svm_hinge") and self.lam <= 0:
            raise ValueError(f"{self.kind} needs lam > 0")
        if self.block_size < 1:
            raise ValueError("block_size must be positive")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be nonnegative")

    def to_dict(self):
        return asdict(self)


def ar1_covariance(p, rho):
    """``Σ_ij = rho^|i - j|``."""
    idx = np.arange(p)
    return rho ** np.abs(idx[:, None] - idx[None, :]).astype(np.float64)


def _gaussian_rows(rng, n, p, rho):
    """``n`` rows drawn from ``N(0, Σ)``; an all-zero row is redrawn."""
    chol = np.linalg.cholesky(ar1_covariance(p, rho))
    rows = rng.standard_normal((n, p)) @ chol.T
    for r in range(n):
        while not np.any(rows[r]):
            rows[r] = chol @ rng.standard_normal(p)
    return rows


def _planted(rng, p, sparsity):
    x = np.zeros(p)
    support = rng.choice(p, size=sparsity, replace=False)
    x[support] = rng.standard_normal(sparsity)
    return x


def _operator(rows, spec):
    return BlockLinearOperator.uniform_blocks(rows, spec.block_size)


def gen_basis_pursuit(spec):
    """``min ||x||_1`` s.t. ``Ax = b`` with a planted sparse feasible point.

    Returns
    -------
    problem : SaddleProblem
        No reference is attached; the planted point is a feasible candidate
        kept in ``meta["x_planted"]`` until certified.
    x_planted : ndarray
        Satisfies ``A x_planted = b`` exactly (``b`` is computed from it).
    """
    rng = np.random.default_rng(spec.seed)
    rows = _gaussian_rows(rng, spec.n, spec.p, spec.rho)
    x_planted = _planted(rng, spec.p, spec.sparsity)
    A = _operator(rows, spec)
    b = A.full_apply(x_planted)
    f = SeparableSum([IndicatorPoint(b)], [A.m])
    problem = SaddleProblem(L1(1.0), f, A, b=b, name="basis_pursuit",
                            meta={"generator": spec.to_dict(), "x_planted": x_planted.copy()})
    return problem, x_planted


def gen_regression(spec, kind=None):
    """Lasso or ridge regression ``½||Ax - b||² + g(x)``.

    ``b = A x_planted + noise`` with noise variance ``spec.noise_variance``.
    """
    kind = spec.kind if kind is None else kind
    if kind not in ("lasso", "ridge"):
        raise ValueError("regression kind must be 'lasso' or 'ridge'")
    rng = np.random.default_rng(spec.seed)
    rows = _gaussian_rows(rng, spec.n, spec.p, spec.rho)
    x_planted = _planted(rng, spec.p, spec.sparsity)
    A = _operator(rows, spec)
    b = A.full_apply(x_planted) + np.sqrt(spec.noise_variance) * rng.standard_normal(A.m)
    lam = spec.lam * float(np.abs(A.full_adjoint(b)).max()) if spec.lam_relative else spec.lam
    if kind == "ridge" and lam <= 0:
        raise ValueError("ridge needs a positive weight")
    g = L1(lam) if kind == "lasso" else SquaredL2(lam)
    f = SeparableSum([LeastSquares(b)], [A.m])
    return SaddleProblem(g, f, A, name=kind,
                         meta={"generator": spec.to_dict(), "lam": lam, "b": b,
                               "x_planted": x_planted})


def gen_svm(spec, labels=None, features=None):
    """Hinge-loss SVM ``(1/n) Σ max(0, 1 - b_i <a_i, x>) + λ/2 ||x||²``.

    The operator row of sample ``i`` is ``b_i a_i``.  Without supplied data,
    two Gaussian clusters are drawn whose projections on a random unit
    direction ``u`` satisfy ``b_i <a_i, u> ≥ margin / 2``, so the classes
    are separable.
    """
    if features is None:
        rng = np.random.default_rng(spec.seed)
        labels = np.where(rng.random(spec.n) < 0.5, -1.0, 1.0)
        feats = rng.standard_normal((spec.n, spec.p))
        u = rng.standard_normal(spec.p)
        u /= np.linalg.norm(u)
        along = feats @ u
        target = labels * (0.5 * spec.margin + np.abs(rng.standard_normal(spec.n)))
        feats += np.outer(target - along, u)
    else:
        feats = features
    labels = np.asarray(labels, dtype=np.float64)
    if not np.all(np.isin(labels, (-1.0, 1.0))):
        raise ValueError("SVM labels must be -1 or +1")
    rows = sparse.diags(labels) @ sparse.csr_matrix(feats)
    A = _operator(rows, spec)
    n = A.m
    f = SeparableSum([Hinge(1.0 / n)], [n])
    return SaddleProblem(SquaredL2(spec.lam), f, A, name="svm_hinge",
                         meta={"generator": spec.to_dict(), "labels": labels})


def generate(spec):
    """Dispatch on ``spec.kind``; always returns a ``SaddleProblem``."""
    if spec.kind == "basis_pursuit":
        return gen_basis_pursuit(spec)[0]
    if spec.kind in ("lasso", "ridge"):
        return gen_regression(spec)
    return gen_svm(spec)


def problem_from_data(features, targets, kind, lam, block_size=1, lam_relative=False):
    """Build a Lasso, ridge or SVM problem from a data matrix (e.g. LIBSVM)."""
    X = sparse.csr_matrix(features, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != (X.shape[0],):
        raise ValueError("one target per data row is required")
    spec = GeneratorSpec(kind=kind, n=X.shape[0], p=X.shape[1], sparsity=0, lam=lam,
                         block_size=block_size, lam_relative=lam_relative)
    if kind == "svm_hinge":
        return gen_svm(spec, targets, X)
    if kind not in ("lasso", "ridge"):
        raise ValueError("data problems are 'lasso', 'ridge' or 'svm_hinge'")
    A = _operator(X, spec)
    weight = lam * float(np.abs(A.full_adjoint(targets)).max()) if lam_relative else lam
    g = L1(weight) if kind == "lasso" else SquaredL2(weight)
    f = SeparableSum([LeastSquares(targets)], [A.m])
    return SaddleProblem(g, f, A, name=kind, meta={"lam": weight, "b": targets})
