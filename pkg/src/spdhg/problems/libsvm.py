"""Reader and writer for the LIBSVM sparse text format.

Each line is ``label idx:val idx:val ...`` with 1-based feature indices.
Indices may appear in any order; a repeated index is an error.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

__all__ = ["LibSVMFormatError", "load_libsvm", "parse_libsvm_lines", "write_libsvm"]


class LibSVMFormatError(ValueError):
    """A line could not be parsed; ``lineno`` is 1-based."""

    def __init__(self, lineno, message):
        self.lineno = int(lineno)
        super().__init__(f"line {lineno}: {message}")


def _number(tok, lineno, what):
    try:
        return float(tok)
    except ValueError:
        raise LibSVMFormatError(lineno, f"non-numeric {what} {tok!r}") from None


def parse_libsvm_lines(lines):
    """Parse an iterable of lines into ``(rows, cols, vals, labels, max_index)``.

    Blank lines and ``#`` comments are skipped.
    """
    rows, cols, vals, labels = [], [], [], []
    max_index = 0
    r = 0
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        labels.append(_number(tokens[0], lineno, "label"))
        seen = set()
        for tok in tokens[1:]:
            idx_s, sep, val_s = tok.partition(":")
            if not sep or not idx_s or not val_s:
                raise LibSVMFormatError(lineno, f"expected 'index:value', got {tok!r}")
            try:
                idx = int(idx_s)
            except ValueError:
                raise LibSVMFormatError(lineno, f"non-integer index {idx_s!r}") from None
            if idx < 1:
                raise LibSVMFormatError(lineno, f"indices are 1-based, got {idx}")
            if idx in seen:
                raise LibSVMFormatError(lineno, f"repeated index {idx}")
            seen.add(idx)
            rows.append(r)
            cols.append(idx - 1)
            vals.append(_number(val_s, lineno, "value"))
            max_index = max(max_index, idx)
        r += 1
    return rows, cols, vals, np.asarray(labels, dtype=np.float64), max_index


def load_libsvm(path, p_override=None, normalize=False):
    """Load a LIBSVM file.

    Parameters
    ----------
    path : str or path-like
    p_override : int, optional
        Feature dimension; must be at least the largest index present.
    normalize : bool
        Scale every nonzero row to unit Euclidean norm.

    Returns
    -------
    features : scipy.sparse.csr_matrix
        Shape ``(n_samples, p)``.
    labels : ndarray
    """
    with open(path, encoding="utf-8") as fh:
        rows, cols, vals, labels, max_index = parse_libsvm_lines(fh)
    p = max_index if p_override is None else int(p_override)
    if p < max_index:
        raise ValueError(f"p_override={p} is smaller than the largest index {max_index}")
    X = sparse.csr_matrix((np.asarray(vals, dtype=np.float64),
                           (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
                          shape=(labels.size, p))
    X.sort_indices()
    if normalize:
        norms = np.sqrt(np.asarray(X.multiply(X).sum(axis=1)).ravel())
        scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
        X = sparse.csr_matrix(sparse.diags(scale) @ X)
    return X, labels


def _fmt(v):
    return repr(float(v))


def write_libsvm(path, features, labels):
    """Write rows with shortest round-trip float formatting (exact reload)."""
    X = sparse.csr_matrix(features)
    X.sort_indices()
    labels = np.asarray(labels, dtype=np.float64)
    if labels.size != X.shape[0]:
        raise ValueError("one label per row is required")
    with open(path, "w", encoding="utf-8") as fh:
        for r in range(X.shape[0]):
            lab = labels[r]
            parts = ["%+d" % lab if lab == int(lab) else _fmt(lab)]
            lo, hi = X.indptr[r], X.indptr[r + 1]
            parts += [f"{c + 1}:{_fmt(v)}" for c, v in zip(X.indices[lo:hi], X.data[lo:hi])]
            fh.write(" ".join(parts) + "\n")
