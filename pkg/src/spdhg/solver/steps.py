"""Step-size rules and the ``p_i^-1 tau sigma_i ||A_i||^2 <= gamma^2`` check."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .types import InapplicableError, StepSizes

__all__ = [
    "DEFAULT_GAMMA",
    "StepSizeError",
    "StepReport",
    "default_step_sizes",
    "pdhg_step_sizes",
    "fb_vc_cd_step_sizes",
    "spdhg_mu_step_sizes",
    "validate_step_sizes",
]

DEFAULT_GAMMA = 0.99


class StepSizeError(ValueError):
    """Step sizes cannot be built for this operator."""


def _check_gamma(gamma):
    if not 0.0 < gamma < 1.0:
        raise StepSizeError(f"gamma must lie in (0, 1), got {gamma!r}")


def _positive_norms(A):
    norms = A.block_norms()
    zero = np.flatnonzero(norms <= 0.0)
    if zero.size:
        raise StepSizeError(
            f"block(s) {zero.tolist()[:10]} have zero norm; sigma_i = gamma/||A_i|| is undefined"
        )
    return norms


def default_step_sizes(A, gamma=DEFAULT_GAMMA, sampler=None):
    """``tau = gamma / (n max_i ||A_i||)`` and ``sigma_i = gamma / ||A_i||``.

    For non-uniform probabilities the dual steps become
    ``sigma_i = gamma^2 p_i / (tau ||A_i||^2)`` so that every block meets the
    step condition with equality.
    """
    _check_gamma(gamma)
    norms = _positive_norms(A)
    n = A.n
    tau = gamma / (n * norms.max())
    if sampler is None or sampler.is_uniform:
        sigma = gamma / norms
    else:
        if sampler.n != n:
            raise StepSizeError("sampler size does not match the block count")
        sigma = gamma ** 2 * sampler.probs / (tau * norms ** 2)
    return StepSizes(tau, sigma, gamma)


def pdhg_step_sizes(A, gamma=DEFAULT_GAMMA):
    """Deterministic rule ``tau = sigma = gamma / ||A||`` (single block)."""
    _check_gamma(gamma)
    norm = A.norm()
    if norm <= 0:
        raise StepSizeError("operator norm is zero")
    return StepSizes(gamma / norm, np.array([gamma / norm]), gamma)


def fb_vc_cd_step_sizes(A, gamma=DEFAULT_GAMMA):
    """Coordinate Vu-Condat rule ``n^2 tau sigma_i ||A_i||^2 <= gamma^2``.

    The SPDHG defaults are shrunk by ``sqrt(n)`` on both sides, making
    the product ``n`` times smaller.
    """
    base = default_step_sizes(A, gamma)
    shrink = np.sqrt(A.n)
    return StepSizes(base.tau / shrink, base.sigma / shrink, gamma)


def spdhg_mu_step_sizes(A, mu_f, mu_g, sampler, gamma=DEFAULT_GAMMA):
    """Strongly convex step sizes with extrapolation ``theta < 1``.

    With ``mu = 2 gamma min_i p_i sqrt(mu_i mu_g) / ||A_i||``:
    ``tau = mu / (2 mu_g)``, ``sigma_i = mu / (2 mu_i p_i)`` and
    ``theta = 1 - mu / (1 + mu / min_i p_i)``.  The first two meet the
    step condition; ``theta`` is the slowest expected contraction among
    the primal block and the dual blocks.
    """
    _check_gamma(gamma)
    mu_f = np.broadcast_to(np.asarray(mu_f, dtype=np.float64), (A.n,))
    if mu_g is None or mu_g <= 0 or np.any(mu_f <= 0):
        raise InapplicableError(
            "SPDHG-mu needs mu_g > 0 and every mu_i > 0; use plain SPDHG for this problem"
        )
    norms = _positive_norms(A)
    probs = sampler.probs
    mu = 2.0 * gamma * np.min(probs * np.sqrt(mu_f * mu_g) / norms)
    tau = mu / (2.0 * mu_g)
    sigma = mu / (2.0 * mu_f * probs)
    theta = 1.0 - mu / (1.0 + mu / probs.min())
    return StepSizes(tau, sigma, gamma, theta)


@dataclass
class StepReport:
    """Per-block ratios ``p_i^-1 tau sigma_i ||A_i||^2 / gamma^2``."""

    ratios: np.ndarray
    gamma: float
    passed: bool
    argmax: int

    @property
    def max_ratio(self):
        return float(self.ratios.max())

    def __str__(self):
        status = "PASS" if self.passed else "FAIL"
        return f"step sizes {status}: max ratio {self.max_ratio:.6g} at block {self.argmax} (gamma={self.gamma})"


def validate_step_sizes(steps, A, sampler, rtol=1e-12):
    """Report the step-condition ratio of every block.

    Passes when ``gamma < 1`` and no ratio exceeds ``1`` (up to ``rtol``).
    """
    norms = A.block_norms()
    ratios = steps.tau * steps.sigma * norms ** 2 / (sampler.probs * steps.gamma ** 2)
    passed = bool(steps.gamma < 1.0 and np.all(ratios <= 1.0 + rtol))
    return StepReport(ratios, steps.gamma, passed, int(np.argmax(ratios)))
