"""Block-row sparse linear operators.

A :class:`BlockLinearOperator` stores ``A`` in CSR form together with an
offsets array that partitions the rows into ``n`` contiguous dual blocks
``A_1, ..., A_n``.  Every stochastic iteration touches a single block, so
per-block apply/adjoint run in time proportional to ``nnz(A_i)``.
"""

from __future__ import annotations

import threading

import numpy as np
from scipy import sparse

__all__ = ["BlockLinearOperator", "DimensionError"]

NORM_TOL = 1e-10
NORM_MAX_ITER = 1000


class DimensionError(ValueError):
    """Raised when a vector does not match the operator's dimensions."""


class BlockLinearOperator:
    """Sparse matrix ``A`` with rows grouped into contiguous dual blocks.

    Parameters
    ----------
    matrix : scipy sparse matrix or array_like
        The full ``(m, p)`` matrix.  Always stored as CSR internally.
    block_offsets : array_like of int, optional
        Row offsets ``0 = o_0 < o_1 < ... < o_n = m``; block ``i`` owns rows
        ``o_i:o_{i+1}``.  Defaults to one block per row.
    """

    def __init__(self, matrix, block_offsets=None):
        csr = sparse.csr_matrix(matrix, dtype=np.float64)
        csr.sum_duplicates()
        csr.sort_indices()
        self._csr = csr
        m, p = csr.shape
        if block_offsets is None:
            offsets = np.arange(m + 1, dtype=np.int64)
        else:
            offsets = np.asarray(block_offsets, dtype=np.int64)
        if offsets.ndim != 1 or offsets.size < 2:
            raise DimensionError("block_offsets needs at least two entries")
        if offsets[0] != 0 or offsets[-1] != m or np.any(np.diff(offsets) <= 0):
            raise DimensionError(
                f"block_offsets must increase strictly from 0 to {m}"
            )
        self.offsets = offsets
        self.n = offsets.size - 1
        self.p = p
        self.m = m
        # raw CSR arrays, shared with the compiled kernels
        self.indptr = np.ascontiguousarray(csr.indptr, dtype=np.int64)
        self.indices = np.ascontiguousarray(csr.indices, dtype=np.int64)
        self.data = np.ascontiguousarray(csr.data, dtype=np.float64)
        self._norms = np.full(self.n, np.nan)
        self._norm_lock = threading.Lock()
        self._blocks = {}

    # ------------------------------------------------------------------
    # constructors
    @classmethod
    def from_dense(cls, array, block_offsets=None):
        """Build from a dense row-major array (stored sparse internally)."""
        array = np.atleast_2d(np.asarray(array, dtype=np.float64))
        return cls(sparse.csr_matrix(array), block_offsets)

    @classmethod
    def from_triplets(cls, rows, cols, vals, shape, block_offsets=None):
        """Build from coordinate triplets; duplicate entries are summed."""
        coo = sparse.coo_matrix((vals, (rows, cols)), shape=shape)
        return cls(coo.tocsr(), block_offsets)

    @classmethod
    def uniform_blocks(cls, matrix, block_size):
        """Partition rows into blocks of ``block_size`` (last may be shorter)."""
        m = sparse.csr_matrix(matrix).shape[0]
        offsets = np.unique(np.r_[np.arange(0, m, block_size), m])
        return cls(matrix, offsets)

    # ------------------------------------------------------------------
    @property
    def shape(self):
        return (self.m, self.p)

    @property
    def block_dims(self):
        return np.diff(self.offsets)

    @property
    def csr(self):
        return self._csr

    def nnz(self, i=None):
        if i is None:
            return int(self.indptr[-1])
        return int(self.indptr[self.offsets[i + 1]] - self.indptr[self.offsets[i]])

    def block_rows(self, i):
        return slice(int(self.offsets[i]), int(self.offsets[i + 1]))

    def block_of_row(self):
        """Block index of every row, shape ``(m,)``."""
        return np.repeat(np.arange(self.n), self.block_dims)

    def block_matrix(self, i):
        """CSR sub-matrix ``A_i`` (cached)."""
        blk = self._blocks.get(i)
        if blk is None:
            blk = self._csr[self.block_rows(i)]
            self._blocks[i] = blk
        return blk

    def as_single_block(self):
        """Same matrix viewed as one dual block (deterministic PDHG)."""
        return BlockLinearOperator(self._csr, [0, self.m])

    def regroup(self, block_offsets):
        return BlockLinearOperator(self._csr, block_offsets)

    def toarray(self):
        return self._csr.toarray()

    # ------------------------------------------------------------------
    def _check_block(self, i):
        if not 0 <= i < self.n:
            raise IndexError(f"block index {i} out of range [0, {self.n})")

    def _check_primal(self, x):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.p,):
            raise DimensionError(f"expected primal vector of shape ({self.p},), got {x.shape}")
        return x

    def block_apply(self, i, x):
        """Return ``A_i x``."""
        self._check_block(i)
        x = self._check_primal(x)
        r0, r1 = self.offsets[i], self.offsets[i + 1]
        if r1 - r0 == 1:
            s, e = self.indptr[r0], self.indptr[r1]
            return np.array([np.dot(self.data[s:e], x[self.indices[s:e]])])
        return self.block_matrix(i) @ x

    def adjoint_block_apply(self, i, y_i):
        """Return ``A_i^T y_i`` as a dense primal vector."""
        self._check_block(i)
        y_i = np.asarray(y_i, dtype=np.float64)
        dim = int(self.offsets[i + 1] - self.offsets[i])
        if y_i.shape != (dim,):
            raise DimensionError(f"block {i} expects shape ({dim},), got {y_i.shape}")
        out = np.zeros(self.p)
        r0 = self.offsets[i]
        for r in range(dim):
            s, e = self.indptr[r0 + r], self.indptr[r0 + r + 1]
            out[self.indices[s:e]] += self.data[s:e] * y_i[r]
        return out

    def full_apply(self, x):
        """Return the stacked dual vector ``Ax``."""
        x = self._check_primal(x)
        return self._csr @ x

    def full_adjoint(self, y):
        """Return ``A^T y``."""
        y = np.asarray(y, dtype=np.float64)
        if y.shape != (self.m,):
            raise DimensionError(f"expected dual vector of shape ({self.m},), got {y.shape}")
        return self._csr.T @ y

    # ------------------------------------------------------------------
    def block_norm(self, i, tol=NORM_TOL, max_iter=NORM_MAX_ITER):
        """Spectral norm ``||A_i||``, computed once and cached.

        Single-row blocks use the row's Euclidean norm, which is exact.
        Otherwise power iteration on ``A_i^T A_i`` runs from a unit start
        vector seeded by ``i`` until successive Rayleigh quotients agree to
        relative ``tol``.  An all-zero block has norm 0.
        """
        self._check_block(i)
        cached = self._norms[i]
        if not np.isnan(cached):
            return float(cached)
        value = self._compute_norm(i, tol, max_iter)
        with self._norm_lock:
            if np.isnan(self._norms[i]):
                self._norms[i] = value
            return float(self._norms[i])

    def _compute_norm(self, i, tol, max_iter):
        r0, r1 = self.offsets[i], self.offsets[i + 1]
        s, e = self.indptr[r0], self.indptr[r1]
        if e == s:
            return 0.0
        if r1 - r0 == 1:
            return float(np.linalg.norm(self.data[s:e]))
        blk = self.block_matrix(i)
        rng = np.random.default_rng(i)
        v = rng.standard_normal(self.p)
        v /= np.linalg.norm(v)
        quotient = 0.0
        for _ in range(max_iter):
            w = blk.T @ (blk @ v)
            new_quotient = float(v @ w)
            wn = np.linalg.norm(w)
            if wn == 0.0:
                return 0.0
            v = w / wn
            if abs(new_quotient - quotient) <= tol * abs(new_quotient):
                quotient = new_quotient
                break
            quotient = new_quotient
        return float(np.sqrt(quotient))

    def block_norms(self):
        """Array of all ``||A_i||``."""
        return np.array([self.block_norm(i) for i in range(self.n)])

    def norm(self):
        """Spectral norm of the whole operator (via the single-block view)."""
        if self.n == 1:
            return self.block_norm(0)
        return self.as_single_block().block_norm(0)

    def __repr__(self):
        return f"BlockLinearOperator(shape={self.shape}, n_blocks={self.n}, nnz={self.nnz()})"
