"""Seeded categorical block sampler on a counter-based stream.

The draw at iteration ``k`` is a pure function of ``(seed, k)``: the
Philox block cipher keyed by ``seed`` is evaluated at counter ``k`` and the
first output word is mapped to a uniform on ``[0, 1)``, then to an index by
inverse CDF.  Trajectories can therefore be replayed or resumed from any
iteration without carrying generator state around.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["SamplerSpec", "uniform", "draw", "draws", "check_expectation_identities",
           "IdentityReport"]

PROB_TOL = 1e-12
_INV_2_53 = 1.0 / 9007199254740992.0


@dataclass(frozen=True)
class SamplerSpec:
    """Probabilities ``p_i > 0`` summing to one, plus a 64-bit seed."""

    probs: np.ndarray
    seed: int = 0
    underline_p: float = field(init=False)

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64).ravel()
        if probs.size == 0 or np.any(probs <= 0):
            raise ValueError("sampling probabilities must be positive")
        if abs(probs.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "seed", int(self.seed) % (1 << 64))
        object.__setattr__(self, "underline_p", float(probs.min()))
        cdf = np.cumsum(probs)
        cdf[-1] = 1.0
        cdf.setflags(write=False)
        object.__setattr__(self, "_cdf", cdf)

    @property
    def n(self):
        return self.probs.size

    @property
    def is_uniform(self):
        return bool(np.all(self.probs == self.probs[0]))

    def with_seed(self, seed):
        return SamplerSpec(self.probs, seed)


def uniform(n, seed=0):
    """Uniform sampling ``p_i = 1/n``."""
    return SamplerSpec(np.full(n, 1.0 / n), seed)


def uniforms(seed, start, count):
    """Uniform variates for counters ``start, ..., start + count - 1``."""
    if count <= 0:
        return np.empty(0)
    bitgen = np.random.Philox(key=int(seed) % (1 << 64))
    if start:
        bitgen.advance(int(start))
    words = bitgen.random_raw(4 * int(count))[::4]
    return (words >> np.uint64(11)).astype(np.float64) * _INV_2_53


def draws(spec, start, count):
    """Block indices for counters ``start, ..., start + count - 1``."""
    if spec.n == 1:
        return np.zeros(max(int(count), 0), dtype=np.int64)
    u = uniforms(spec.seed, start, count)
    idx = np.searchsorted(spec._cdf, u, side="right")
    return np.minimum(idx, spec.n - 1).astype(np.int64)


def draw(spec, counter):
    """The block index drawn at stream position ``counter``."""
    return int(draws(spec, counter, 1)[0])


# ----------------------------------------------------------------------
# conditional expectation identities of a single dual update


@dataclass
class IdentityReport:
    """Outcome of the dual-sampling identity checks at one iterate."""

    exact: bool
    passed: bool
    errors: dict
    tol: float
    details: dict = field(default_factory=dict)

    def __str__(self):
        worst = max(self.errors.items(), key=lambda kv: kv[1]) if self.errors else ("-", 0.0)
        mode = "exact" if self.exact else "monte-carlo"
        return f"sampler identities ({mode}): {'PASS' if self.passed else 'FAIL'} worst {worst[0]}={worst[1]:.3e}"


def _rel(lhs, rhs, scale):
    return float(np.max(np.abs(np.asarray(lhs) - np.asarray(rhs)))) / max(float(scale), 1e-300)


def check_expectation_identities(y, y_hat, sigma_rows, p_rows, block_offsets, probs,
                                 Y=None, exact=True, n_draws=100_000, seed=0, tol=1e-10,
                                 n_sigma=3.0):
    """Check the identities linking ``y^{k+1}`` to the full candidate ``ŷ``.

    ``y^{k+1}`` equals ``y`` except on the drawn block ``i`` (probability
    ``p_i``) where it equals ``ŷ_i``.  With ``D = diag(σ)`` and
    ``P = diag(p)`` expanded per row, the checks are::

        E[y+]                  = P ŷ + (I - P) y
        E||y+ - Y||²_{D⁻¹}     = ||ŷ - Y||²_{D⁻¹P} + ||y - Y||²_{D⁻¹(I-P)}
        ŷ                      = P⁻¹ E[y+] - (P⁻¹ - I) y
        ||ŷ - Y||²_{D⁻¹}       = E||y+ - Y||²_{D⁻¹P⁻¹} - ||y - Y||²_{D⁻¹(P⁻¹-I)}
        ||ŷ - y||²_{D⁻¹}       = E||y+ - y||²_{D⁻¹P⁻¹}

    ``exact=True`` enumerates every block with its weight and requires
    agreement to relative ``tol``.  Otherwise expectations are Monte Carlo
    means of ``n_draws`` samples and must lie within ``n_sigma`` standard
    errors; the vector identity is tested along a fixed random direction.
    """
    if y_hat is None:
        raise ValueError("the full-dimensional dual candidate ŷ is required")
    y = np.asarray(y, dtype=np.float64)
    y_hat = np.asarray(y_hat, dtype=np.float64)
    probs = np.asarray(probs, dtype=np.float64)
    Y = y if Y is None else np.asarray(Y, dtype=np.float64)
    w = 1.0 / np.asarray(sigma_rows, dtype=np.float64)
    pr = np.asarray(p_rows, dtype=np.float64)
    n = probs.size

    def outcome(i):
        out = y.copy()
        sl = slice(block_offsets[i], block_offsets[i + 1])
        out[sl] = y_hat[sl]
        return out

    # closed-form right-hand sides
    mean_rhs = pr * y_hat + (1.0 - pr) * y
    q711_rhs = np.sum(w * pr * (y_hat - Y) ** 2) + np.sum(w * (1.0 - pr) * (y - Y) ** 2)
    lhs713 = np.sum(w * (y_hat - Y) ** 2)
    corr713 = np.sum(w * (1.0 / pr - 1.0) * (y - Y) ** 2)
    lhs714 = np.sum(w * (y_hat - y) ** 2)

    def quad(v, ref, weight):
        return np.sum(weight * (v - ref) ** 2, axis=-1)

    errors = {}
    details = {}
    if exact:
        outs = np.stack([outcome(i) for i in range(n)])
        mean = probs @ outs
        e711 = probs @ quad(outs, Y, w)
        e713 = probs @ quad(outs, Y, w / pr)
        e714 = probs @ quad(outs, y, w / pr)
        recon = mean / pr - (1.0 / pr - 1.0) * y
        vscale = max(np.max(np.abs(mean)), np.max(np.abs(y_hat)), np.max(np.abs(y)))
        errors["mean"] = _rel(mean, mean_rhs, vscale)
        errors["second_moment"] = _rel(e711, q711_rhs, max(abs(e711), abs(q711_rhs)))
        errors["reconstruction"] = _rel(recon, y_hat, vscale / pr.min())
        errors["weighted_distance"] = _rel(lhs713, e713 - corr713, max(lhs713, e713, corr713))
        errors["step_length"] = _rel(lhs714, e714, max(lhs714, e714))
        passed = all(e <= tol for e in errors.values())
        return IdentityReport(True, passed, errors, tol, details)

    idx = draws(SamplerSpec(probs, seed), 0, n_draws)
    rng = np.random.default_rng(seed)
    direction = rng.standard_normal(y.size)
    # scalar observables per outcome, then gathered per draw
    outs = np.stack([outcome(i) for i in range(n)])
    obs = {
        "mean": (outs @ direction, direction @ mean_rhs),
        "second_moment": (quad(outs, Y, w), q711_rhs),
        "weighted_distance": (quad(outs, Y, w / pr), lhs713 + corr713),
        "step_length": (quad(outs, y, w / pr), lhs714),
    }
    passed = True
    for name, (per_outcome, target) in obs.items():
        samples = per_outcome[idx]
        mean = samples.mean()
        se = samples.std(ddof=1) / np.sqrt(n_draws)
        dev = abs(mean - target)
        # a degenerate distribution has zero spread; only rounding remains
        bound = n_sigma * se + 1e-12 * max(1.0, abs(target))
        errors[name] = dev / bound if bound > 0 else 0.0
        details[name] = {"mc_mean": float(mean), "target": float(target), "stderr": float(se)}
        passed = passed and dev <= bound
    return IdentityReport(False, passed, errors, n_sigma, details)
