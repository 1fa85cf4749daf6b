"""Compiled inner loops for the dual-block iterations.

Functions are passed as per-coordinate parameter arrays ``(code, b, c, s,
lam)`` produced by ``ProxableFunction.kernel_params``; the codes follow
``spdhg.funcs.KERNEL_CODES``.
"""

import numpy as np
from numba import njit

OK = -1


@njit(cache=True, inline="always")
def _prox(code, v, t, b, c, s, lam):
    if code == 0:
        return v
    if code == 1:
        th = t * lam
        if v > th:
            return v - th
        if v < -th:
            return v + th
        return 0.0
    if code == 2:
        return v / (1.0 + t * lam)
    if code == 3:
        return b
    if code == 4:
        return (v + t * b) / (1.0 + t)
    # hinge
    w = s * v
    if w > 1.0:
        u = w
    elif w < 1.0 - t * c:
        u = w + t * c
    else:
        u = 1.0
    return s * u


@njit(cache=True, inline="always")
def _conj_prox(code, v, t, b, c, s, lam):
    if code == 0:
        return 0.0
    if code == 1:
        if v > lam:
            return lam
        if v < -lam:
            return -lam
        return v
    if code == 2:
        return v * lam / (lam + t)
    if code == 3:
        return v - t * b
    if code == 4:
        return (v - t * b) / (1.0 + t)
    z = s * v - t
    if z > 0.0:
        z = 0.0
    elif z < -c:
        z = -c
    return s * z


@njit(cache=True, nogil=True)
def _full_adjoint(indptr, indices, data, y, out):
    out[:] = 0.0
    for r in range(y.size):
        yr = y[r]
        if yr != 0.0:
            for q in range(indptr[r], indptr[r + 1]):
                out[indices[q]] += data[q] * yr


@njit(cache=True, nogil=True)
def spdhg_loop(x, y, y_prev, aty, aty_bar, dy, last_blk,
               indptr, indices, data, offsets,
               gk, gb, gc, gs, gl, fk, fb, fc, fs, fl,
               tau, sigma, inv_p, theta, blocks, k0, sync_every,
               track, sum_x, sum_y, y_stamp):
    """Run ``len(blocks)`` SPDHG iterations in place.

    ``dy`` holds the last dual change (row-indexed, nonzero on block
    ``last_blk[0]`` only) so the extrapolated ``A^T ȳ`` can be rebuilt after
    a resynchronisation.  ``sum_y`` is accumulated lazily with per-row time
    stamps (see ``flush_y_sum``).  Returns the local index of the first
    non-finite iterate, or ``OK``.
    """
    p = x.size
    for t in range(blocks.size):
        # primal step
        for j in range(p):
            x[j] = _prox(gk[j], x[j] - tau * aty_bar[j], tau, gb[j], gc[j], gs[j], gl[j])
        if track:
            for j in range(p):
                sum_x[j] += x[j]
        i = blocks[t]
        r0 = offsets[i]
        r1 = offsets[i + 1]
        si = sigma[i]
        # bring y_prev back in sync with y on the previously touched block
        lb = last_blk[0]
        if lb >= 0:
            for r in range(offsets[lb], offsets[lb + 1]):
                y_prev[r] = y[r]
                dy[r] = 0.0
        kk = k0 + t
        finite = True
        for r in range(r0, r1):
            acc = 0.0
            for q in range(indptr[r], indptr[r + 1]):
                acc += data[q] * x[indices[q]]
            v = y[r] + si * acc
            yn = _conj_prox(fk[r], v, si, fb[r], fc[r], fs[r], fl[r])
            if not np.isfinite(yn):
                finite = False
            if track:
                sum_y[r] += y[r] * (kk - y_stamp[r])
                y_stamp[r] = kk
            dy[r] = yn - y[r]
            y_prev[r] = y[r]
            y[r] = yn
        last_blk[0] = i
        # incremental adjoint updates
        if sync_every > 0 and (kk + 1) % sync_every == 0:
            _full_adjoint(indptr, indices, data, y, aty)
        else:
            for r in range(r0, r1):
                d = dy[r]
                if d != 0.0:
                    for q in range(indptr[r], indptr[r + 1]):
                        aty[indices[q]] += data[q] * d
        scale = theta * inv_p[i]
        for j in range(p):
            aty_bar[j] = aty[j]
        for r in range(r0, r1):
            d = dy[r]
            if d != 0.0:
                for q in range(indptr[r], indptr[r + 1]):
                    aty_bar[indices[q]] += scale * data[q] * d
        if not finite:
            return t
        for j in range(p):
            if not np.isfinite(x[j]):
                return t
    return OK


@njit(cache=True, nogil=True)
def flush_y_sum(y, sum_y, y_stamp, k_now):
    """Complete the lazy running sum of ``y`` up to iteration ``k_now``."""
    for r in range(y.size):
        sum_y[r] += y[r] * (k_now - y_stamp[r])
        y_stamp[r] = k_now


@njit(cache=True, nogil=True)
def fbvccd_loop(x, x_old, y, aty, indptr, indices, data, offsets,
                gk, gb, gc, gs, gl, fk, fb, fc, fs, fl,
                tau, sigma, blocks, k0, sync_every):
    """Randomised dual-block Vu-Condat iterations (primal extrapolation)."""
    p = x.size
    for t in range(blocks.size):
        for j in range(p):
            x_old[j] = x[j]
            x[j] = _prox(gk[j], x[j] - tau * aty[j], tau, gb[j], gc[j], gs[j], gl[j])
        i = blocks[t]
        si = sigma[i]
        finite = True
        kk = k0 + t
        resync = sync_every > 0 and (kk + 1) % sync_every == 0
        for r in range(offsets[i], offsets[i + 1]):
            acc = 0.0
            for q in range(indptr[r], indptr[r + 1]):
                col = indices[q]
                acc += data[q] * (2.0 * x[col] - x_old[col])
            yn = _conj_prox(fk[r], y[r] + si * acc, si, fb[r], fc[r], fs[r], fl[r])
            if not np.isfinite(yn):
                finite = False
            d = yn - y[r]
            y[r] = yn
            if d != 0.0 and not resync:
                for q in range(indptr[r], indptr[r + 1]):
                    aty[indices[q]] += data[q] * d
        if resync:
            _full_adjoint(indptr, indices, data, y, aty)
        if not finite:
            return t
        for j in range(p):
            if not np.isfinite(x[j]):
                return t
    return OK
