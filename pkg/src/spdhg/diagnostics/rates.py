"""Empirical linear-rate fitting.

The fitted slope of ``log(metric)`` against the iteration counter is the
observable stand-in for a contraction factor ``1 - ρ``; the subregularity
modulus behind ``ρ`` is not estimated.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = ["RateModel", "rate_fit", "MIN_SAMPLES"]

MIN_SAMPLES = 10


@dataclass
class RateModel:
    """Least-squares line through ``(iter, log metric)`` on a window.

    Attributes
    ----------
    slope : float
        Per-iteration log-decay (``exp(slope)`` is the contraction factor).
    intercept : float
    r_squared : float
        Coefficient of determination in ``[0, 1]``.
    window : tuple of int
        Half-open index range ``[start, stop)`` of the fitted samples.
    c1 : float or None
        ``1 - γ`` of the run, when supplied.
    excluded : int
        Nonpositive samples dropped inside the window.
    """

    slope: float
    intercept: float
    r_squared: float
    window: tuple
    c1: float | None = None
    excluded: int = 0

    @property
    def factor(self):
        return float(np.exp(self.slope))


def _window(values, head, floor_mult, tail):
    v0 = next((v for v in values if v > 0 and np.isfinite(v)), None)
    if v0 is None:
        return 0, 0
    n = len(values)
    start = next((j for j in range(n) if 0 < values[j] <= head * v0), None)
    if start is None:
        return 0, n
    floor = floor_mult * np.finfo(np.float64).eps * v0
    stop = next((j + 1 for j in range(start, n) if values[j] <= tail * floor), n)
    return start, stop


def rate_fit(iters, values, c1=None, head=0.1, floor_mult=10.0, tail=1e3,
             min_samples=MIN_SAMPLES):
    """Fit ``log(metric) ≈ intercept + slope · iter`` on the policy window.

    The window opens at the first sample ``≤ head · m₀`` (``m₀`` is the
    first positive sample) and closes at the first sample
    ``≤ tail · floor_mult · eps · m₀``.  A metric that never drops below
    ``head · m₀`` is fitted on the whole series.  If the window holds fewer
    than ``min_samples`` usable points, the whole series is used.

    Raises
    ------
    ValueError
        Fewer than ``min_samples`` positive samples overall.
    """
    iters = np.asarray(iters, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if iters.shape != values.shape:
        raise ValueError("iters and values must have the same length")
    usable = (values > 0) & np.isfinite(values)
    if usable.sum() < min_samples:
        raise ValueError(f"rate fit needs at least {min_samples} positive samples")
    start, stop = _window(values, head, floor_mult, tail)
    sel = np.zeros(values.size, dtype=bool)
    sel[start:stop] = True
    excluded = int(np.sum(sel & ~usable))
    if np.sum(sel & usable) < min_samples:
        start, stop = 0, values.size
        sel[:] = True
        excluded = int(np.sum(~usable))
    if excluded:
        warnings.warn(f"rate fit: {excluded} nonpositive sample(s) excluded", RuntimeWarning,
                      stacklevel=2)
    keep = sel & usable
    t = iters[keep]
    z = np.log(values[keep])
    slope, intercept = np.polyfit(t, z, 1)
    resid = z - (intercept + slope * t)
    ss_tot = float(np.sum((z - z.mean()) ** 2))
    ss_res = float(np.sum(resid ** 2))
    if ss_tot <= 1e-30 * max(1.0, float(np.sum(z * z))):
        r2 = 1.0
        slope = 0.0 if abs(slope) < 1e-15 else slope
    else:
        r2 = min(1.0, max(0.0, 1.0 - ss_res / ss_tot))
    return RateModel(float(slope), float(intercept), r2, (int(start), int(stop)), c1, excluded)
