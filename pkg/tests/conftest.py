"""Shared fixtures: small random instances of every problem family."""

import numpy as np
import pytest
from scipy import sparse

from spdhg.funcs import L1, Hinge, IndicatorPoint, LeastSquares, SeparableSum, SquaredL2
from spdhg.linops import BlockLinearOperator
from spdhg.solver import SaddleProblem

FAMILIES = ("lasso", "ridge", "constrained", "svm")


def random_problem(family, rng, m=6, p=4, n_blocks=3):
    """A small random instance of ``family`` with ``n_blocks`` contiguous row blocks."""
    M = rng.standard_normal((m, p))
    cuts = np.sort(rng.choice(np.arange(1, m), size=n_blocks - 1, replace=False))
    offsets = np.r_[0, cuts, m]
    A = BlockLinearOperator(sparse.csr_matrix(M), offsets)
    if family == "lasso":
        b = rng.standard_normal(m)
        return SaddleProblem(L1(0.3), SeparableSum([LeastSquares(b)], [m]), A, name="lasso")
    if family == "ridge":
        b = rng.standard_normal(m)
        return SaddleProblem(SquaredL2(0.7), SeparableSum([LeastSquares(b)], [m]), A, name="ridge")
    if family == "constrained":
        b = M @ rng.standard_normal(p)
        return SaddleProblem(L1(1.0), SeparableSum([IndicatorPoint(b)], [m]), A, b=b,
                             name="constrained")
    if family == "svm":
        return SaddleProblem(SquaredL2(0.5), SeparableSum([Hinge(1.0 / m)], [m]), A, name="svm")
    raise ValueError(family)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
