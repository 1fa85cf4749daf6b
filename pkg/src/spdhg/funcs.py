"""Catalog of proximable convex functions.

Every entry is coordinatewise separable, so proximal steps accept either a
scalar or a positive diagonal (array) step, and a function over a long
vector restricts to any contiguous block by slicing its parameters.

Each entry exposes

* ``value`` / ``conj_value``: extended-real values (``inf`` off-domain),
* ``prox(v, step)``: ``argmin_u f(u) + ||u - v||^2_{step^-1} / 2``,
* ``conj_prox(v, step)``: the same for the Fenchel conjugate ``f*``,
* ``subdiff_dist`` / ``conj_subdiff_dist``: ``dist(v, ∂f(x))`` and
  ``dist(v, ∂f*(y))``.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "InfeasibleQueryError",
    "ProxableFunction",
    "Zero",
    "L1",
    "SquaredL2",
    "IndicatorPoint",
    "LeastSquares",
    "Hinge",
    "SeparableSum",
    "KERNEL_CODES",
]

# relative slack when deciding domain membership of floating-point iterates
DOMAIN_TOL = 1e-12

KERNEL_CODES = {
    "zero": 0,
    "l1": 1,
    "squared_l2": 2,
    "indicator_point": 3,
    "least_squares": 4,
    "hinge": 5,
}


class InfeasibleQueryError(ValueError):
    """A subdifferential was requested at a point outside the domain."""


def _vec(v):
    return np.atleast_1d(np.asarray(v, dtype=np.float64))


def _check_step(step):
    step = np.asarray(step, dtype=np.float64)
    if not np.all(step > 0):
        raise ValueError("proximal step must be positive")
    return step


def _interval_dist(v, lo, hi):
    """Euclidean distance from v to the box [lo, hi] (coordinatewise)."""
    return float(np.linalg.norm(v - np.clip(v, lo, hi)))


class ProxableFunction:
    """Base class; subclasses provide closed forms."""

    kind = "abstract"
    #: strong convexity modulus of the function itself
    strong_convexity = None
    #: strong convexity modulus of its conjugate (1 / smoothness)
    conj_strong_convexity = None
    #: Lipschitz constant per coordinate, when finite
    lipschitz = None

    def value(self, x):
        raise NotImplementedError

    def prox(self, v, step):
        raise NotImplementedError

    def conj_value(self, y):
        raise NotImplementedError

    def conj_prox(self, v, step):
        # Moreau: prox_{s f*}(v) = v - s prox_{f/s}(v/s)
        v = _vec(v)
        step = _check_step(step)
        return v - step * self.prox(v / step, 1.0 / step)

    def subdiff_dist(self, x, v):
        raise NotImplementedError

    def conj_subdiff_dist(self, y, v):
        raise NotImplementedError

    def restrict(self, sl):
        """The same function on the coordinates ``sl``."""
        return self

    def kernel_params(self, dim):
        """Per-coordinate arrays ``(code, b, c, s, lam)`` for compiled loops."""
        raise NotImplementedError(f"{type(self).__name__} has no compiled form")

    def _params(self, dim, b=0.0, c=0.0, s=1.0, lam=0.0):
        def full(a):
            return np.broadcast_to(np.asarray(a, dtype=np.float64), (dim,)).copy()

        code = np.full(dim, KERNEL_CODES[self.kind], dtype=np.int64)
        return code, full(b), full(c), full(s), full(lam)


class Zero(ProxableFunction):
    """f(x) = 0; its conjugate is the indicator of {0}."""

    kind = "zero"
    strong_convexity = 0.0

    def value(self, x):
        return 0.0

    def prox(self, v, step):
        _check_step(step)
        return _vec(v).copy()

    def conj_value(self, y):
        return 0.0 if np.all(_vec(y) == 0.0) else np.inf

    def conj_prox(self, v, step):
        _check_step(step)
        return np.zeros_like(_vec(v))

    def subdiff_dist(self, x, v):
        return float(np.linalg.norm(_vec(v)))

    def conj_subdiff_dist(self, y, v):
        if np.any(_vec(y) != 0.0):
            raise InfeasibleQueryError("conjugate of Zero is finite only at y = 0")
        return 0.0

    def kernel_params(self, dim):
        return self._params(dim)

    def __repr__(self):
        return "Zero()"


class L1(ProxableFunction):
    """f(x) = lam * ||x||_1."""

    kind = "l1"
    strong_convexity = 0.0

    def __init__(self, lam=1.0):
        if lam < 0:
            raise ValueError("L1 weight must be nonnegative")
        self.lam = float(lam)

    def value(self, x):
        return self.lam * float(np.abs(_vec(x)).sum())

    def prox(self, v, step):
        v = _vec(v)
        thresh = _check_step(step) * self.lam
        return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)

    def conj_value(self, y):
        bound = self.lam * (1.0 + DOMAIN_TOL) + DOMAIN_TOL
        return 0.0 if np.all(np.abs(_vec(y)) <= bound) else np.inf

    def conj_prox(self, v, step):
        _check_step(step)
        return np.clip(_vec(v), -self.lam, self.lam)

    def subdiff_dist(self, x, v):
        x, v = _vec(x), _vec(v)
        lam = self.lam
        lo = np.where(x > 0, lam, -lam)
        hi = np.where(x < 0, -lam, lam)
        return _interval_dist(v, lo, hi)

    def conj_subdiff_dist(self, y, v):
        y, v = _vec(y), _vec(v)
        lam = self.lam
        slack = DOMAIN_TOL * max(1.0, lam)
        if np.any(np.abs(y) > lam + slack):
            raise InfeasibleQueryError("y outside the dual box of L1")
        # normal cone of the box [-lam, lam]
        lo = np.where(y <= -lam + slack, -np.inf, 0.0)
        hi = np.where(y >= lam - slack, np.inf, 0.0)
        return _interval_dist(v, lo, hi)

    def kernel_params(self, dim):
        return self._params(dim, lam=self.lam)

    def __repr__(self):
        return f"L1(lam={self.lam})"


class SquaredL2(ProxableFunction):
    """f(x) = lam/2 * ||x||^2."""

    kind = "squared_l2"

    def __init__(self, lam=1.0):
        if lam < 0:
            raise ValueError("SquaredL2 weight must be nonnegative")
        self.lam = float(lam)
        self.strong_convexity = self.lam
        self.conj_strong_convexity = 1.0 / self.lam if self.lam > 0 else None

    def value(self, x):
        x = _vec(x)
        return 0.5 * self.lam * float(x @ x)

    def prox(self, v, step):
        return _vec(v) / (1.0 + _check_step(step) * self.lam)

    def conj_value(self, y):
        y = _vec(y)
        if self.lam == 0.0:
            return 0.0 if np.all(y == 0.0) else np.inf
        return float(y @ y) / (2.0 * self.lam)

    def conj_prox(self, v, step):
        step = _check_step(step)
        return _vec(v) * self.lam / (self.lam + step)

    def subdiff_dist(self, x, v):
        return float(np.linalg.norm(_vec(v) - self.lam * _vec(x)))

    def conj_subdiff_dist(self, y, v):
        y = _vec(y)
        if self.lam == 0.0:
            if np.any(y != 0.0):
                raise InfeasibleQueryError("conjugate of 0-weight SquaredL2 is finite only at 0")
            return 0.0
        return float(np.linalg.norm(_vec(v) - y / self.lam))

    def kernel_params(self, dim):
        return self._params(dim, lam=self.lam)

    def __repr__(self):
        return f"SquaredL2(lam={self.lam})"


class IndicatorPoint(ProxableFunction):
    """f = indicator of {b}; f*(y) = <b, y>."""

    kind = "indicator_point"
    conj_strong_convexity = 0.0

    def __init__(self, b):
        self.b = _vec(b).copy()

    def value(self, x):
        return 0.0 if np.array_equal(_vec(x), np.broadcast_to(self.b, _vec(x).shape)) else np.inf

    def prox(self, v, step):
        _check_step(step)
        return np.broadcast_to(self.b, _vec(v).shape).copy()

    def conj_value(self, y):
        return float(_vec(y) @ np.broadcast_to(self.b, _vec(y).shape))

    def conj_prox(self, v, step):
        return _vec(v) - _check_step(step) * self.b

    def subdiff_dist(self, x, v):
        x = _vec(x)
        if not np.array_equal(x, np.broadcast_to(self.b, x.shape)):
            raise InfeasibleQueryError("x differs from the indicator's point")
        return 0.0

    def conj_subdiff_dist(self, y, v):
        return float(np.linalg.norm(_vec(v) - self.b))

    def restrict(self, sl):
        return IndicatorPoint(self.b[sl]) if self.b.size > 1 else self

    def kernel_params(self, dim):
        return self._params(dim, b=self.b)

    def __repr__(self):
        return f"IndicatorPoint(b=<{self.b.size}>)"


class LeastSquares(ProxableFunction):
    """f(s) = 1/2 ||s - b||^2; f*(y) = 1/2 ||y||^2 + <b, y>."""

    kind = "least_squares"
    strong_convexity = 1.0
    conj_strong_convexity = 1.0

    def __init__(self, b):
        self.b = _vec(b).copy()

    def value(self, x):
        r = _vec(x) - self.b
        return 0.5 * float(r @ r)

    def prox(self, v, step):
        step = _check_step(step)
        return (_vec(v) + step * self.b) / (1.0 + step)

    def conj_value(self, y):
        y = _vec(y)
        return 0.5 * float(y @ y) + float(np.broadcast_to(self.b, y.shape) @ y)

    def conj_prox(self, v, step):
        step = _check_step(step)
        return (_vec(v) - step * self.b) / (1.0 + step)

    def subdiff_dist(self, x, v):
        return float(np.linalg.norm(_vec(v) - (_vec(x) - self.b)))

    def conj_subdiff_dist(self, y, v):
        return float(np.linalg.norm(_vec(v) - (_vec(y) + self.b)))

    def restrict(self, sl):
        return LeastSquares(self.b[sl]) if self.b.size > 1 else self

    def kernel_params(self, dim):
        return self._params(dim, b=self.b)

    def __repr__(self):
        return f"LeastSquares(b=<{self.b.size}>)"


class Hinge(ProxableFunction):
    """f(t) = c * sum_j max(0, 1 - s_j t_j) with signs s_j in {-1, +1}.

    For ``s = 1`` the conjugate is ``f*(y) = sum(y)`` on ``[-c, 0]^m``.
    """

    kind = "hinge"
    strong_convexity = 0.0
    conj_strong_convexity = 0.0

    def __init__(self, c=1.0, sign=1.0):
        c_arr = np.asarray(c, dtype=np.float64)
        s_arr = np.asarray(sign, dtype=np.float64)
        if np.any(c_arr <= 0):
            raise ValueError("hinge weight c must be positive")
        if np.any(np.abs(s_arr) != 1.0):
            raise ValueError("hinge sign must be -1 or +1")
        self.c = c_arr if c_arr.ndim else float(c_arr)
        self.sign = s_arr if s_arr.ndim else float(s_arr)
        self.lipschitz = self.c

    def value(self, x):
        t = self.sign * _vec(x)
        return float(np.sum(self.c * np.maximum(0.0, 1.0 - t)))

    def prox(self, v, step):
        step = _check_step(step)
        w = self.sign * _vec(v)
        u = np.where(w > 1.0, w, np.where(w < 1.0 - step * self.c, w + step * self.c, 1.0))
        return self.sign * u

    def _in_dom(self, z):
        slack = DOMAIN_TOL * np.maximum(1.0, self.c)
        return np.all((z >= -self.c - slack) & (z <= slack))

    def conj_value(self, y):
        z = self.sign * _vec(y)
        return float(z.sum()) if self._in_dom(z) else np.inf

    def conj_prox(self, v, step):
        step = _check_step(step)
        z = np.clip(self.sign * _vec(v) - step, -self.c, 0.0)
        return self.sign * z

    def subdiff_dist(self, x, v):
        t = self.sign * _vec(x)
        w = self.sign * _vec(v)
        c = np.broadcast_to(self.c, t.shape)
        lo = np.where(t > 1.0, 0.0, -c)
        hi = np.where(t < 1.0, -c, 0.0)
        return _interval_dist(w, lo, hi)

    def conj_subdiff_dist(self, y, v):
        z = self.sign * _vec(y)
        w = self.sign * _vec(v)
        if not self._in_dom(z):
            raise InfeasibleQueryError("y outside [-c, 0] for the hinge conjugate")
        c = np.broadcast_to(self.c, z.shape)
        slack = DOMAIN_TOL * np.maximum(1.0, c)
        # ∂f*(z) = 1 + normal cone of [-c, 0] at z
        lo = np.where(z <= -c + slack, -np.inf, 1.0)
        hi = np.where(z >= -slack, np.inf, 1.0)
        return _interval_dist(w, lo, hi)

    def restrict(self, sl):
        c = self.c[sl] if np.ndim(self.c) else self.c
        s = self.sign[sl] if np.ndim(self.sign) else self.sign
        return Hinge(c, s)

    def kernel_params(self, dim):
        return self._params(dim, c=self.c, s=self.sign)

    def __repr__(self):
        return f"Hinge(c={self.c if np.ndim(self.c) == 0 else '<array>'})"


class SeparableSum(ProxableFunction):
    """f(y) = sum_j f_j(y_j) over consecutive coordinate ranges.

    Parameters
    ----------
    pieces : list of ProxableFunction
    dims : list of int
        Number of coordinates owned by each piece.
    """

    kind = "separable_sum"

    def __init__(self, pieces, dims):
        if len(pieces) != len(dims) or not pieces:
            raise ValueError("need one positive dimension per piece")
        self.pieces = list(pieces)
        self.dims = [int(d) for d in dims]
        if min(self.dims) <= 0:
            raise ValueError("piece dimensions must be positive")
        self.offsets = np.concatenate([[0], np.cumsum(self.dims)]).astype(np.int64)
        self.dim = int(self.offsets[-1])
        conj_mu = [getattr(f, "conj_strong_convexity", None) for f in self.pieces]
        self.conj_strong_convexity = None if None in conj_mu else float(min(conj_mu))

    @classmethod
    def single(cls, fn, dim):
        return cls([fn], [dim])

    def _split(self, v):
        v = _vec(v)
        if v.shape != (self.dim,):
            raise ValueError(f"expected vector of length {self.dim}, got {v.shape}")
        return [v[self.offsets[j]:self.offsets[j + 1]] for j in range(len(self.pieces))]

    def _split_step(self, step):
        step = np.asarray(step, dtype=np.float64)
        if step.ndim == 0:
            return [step] * len(self.pieces)
        return self._split(step)

    def value(self, x):
        return float(sum(f.value(xj) for f, xj in zip(self.pieces, self._split(x))))

    def conj_value(self, y):
        return float(sum(f.conj_value(yj) for f, yj in zip(self.pieces, self._split(y))))

    def prox(self, v, step):
        return np.concatenate([
            f.prox(vj, sj) for f, vj, sj in zip(self.pieces, self._split(v), self._split_step(step))
        ])

    def conj_prox(self, v, step):
        return np.concatenate([
            f.conj_prox(vj, sj) for f, vj, sj in zip(self.pieces, self._split(v), self._split_step(step))
        ])

    def subdiff_dist(self, x, v):
        parts = [f.subdiff_dist(xj, vj) for f, xj, vj in zip(self.pieces, self._split(x), self._split(v))]
        return float(np.linalg.norm(parts))

    def conj_subdiff_dist(self, y, v):
        parts = [f.conj_subdiff_dist(yj, vj) for f, yj, vj in zip(self.pieces, self._split(y), self._split(v))]
        return float(np.linalg.norm(parts))

    def conj_subdiff_dists(self, y, v, offsets):
        """Per-block ``dist(v_i, ∂f_i*(y_i))`` for a row partition ``offsets``."""
        return np.array([
            self.restrict_range(offsets[i], offsets[i + 1]).conj_subdiff_dist(
                y[offsets[i]:offsets[i + 1]], v[offsets[i]:offsets[i + 1]])
            for i in range(len(offsets) - 1)
        ])

    def restrict_range(self, start, stop):
        """The function on coordinates ``start:stop``."""
        start, stop = int(start), int(stop)
        out, dims = [], []
        for j, f in enumerate(self.pieces):
            lo = max(start, self.offsets[j])
            hi = min(stop, self.offsets[j + 1])
            if lo < hi:
                out.append(f.restrict(slice(lo - self.offsets[j], hi - self.offsets[j])))
                dims.append(hi - lo)
        if len(out) == 1:
            return out[0]
        return SeparableSum(out, dims)

    def restrict(self, sl):
        start, stop, _ = sl.indices(self.dim)
        return self.restrict_range(start, stop)

    def kernel_params(self, dim=None):
        parts = [f.kernel_params(d) for f, d in zip(self.pieces, self.dims)]
        return tuple(np.concatenate(arrs) for arrs in zip(*parts))

    def lipschitz_sq_per_coord(self):
        """Squared per-coordinate Lipschitz constants, or None if unbounded."""
        out = []
        for f, d in zip(self.pieces, self.dims):
            if f.lipschitz is None:
                return None
            out.append(np.broadcast_to(np.asarray(f.lipschitz, dtype=np.float64) ** 2, (d,)))
        return np.concatenate(out)

    def __repr__(self):
        return f"SeparableSum({self.pieces!r}, dims={self.dims})"
