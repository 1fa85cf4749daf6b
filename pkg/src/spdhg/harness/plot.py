"""Static SVG convergence plots (log-scale metric against epoch)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["convergence_svg"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")
_W, _H = 720, 440
_ML, _MR, _MT, _MB = 70, 150, 30, 50


def _ticks(lo, hi):
    return list(range(int(math.floor(lo)), int(math.ceil(hi)) + 1))


def convergence_svg(curves, metric, title=None):
    """Render curves to SVG text.

    Parameters
    ----------
    curves : dict
        ``method -> (epochs, mean, lo, hi)``; ``lo``/``hi`` bound the band
        drawn behind the mean curve (min and max across seeds).
    metric : str
        Axis label.
    """
    pos = []
    xmax = 0.0
    for ep, mean, lo, hi in curves.values():
        for arr in (mean, lo, hi):
            a = np.asarray(arr, dtype=float)
            pos.extend(a[(a > 0) & np.isfinite(a)].tolist())
        if len(ep):
            xmax = max(xmax, float(np.max(ep)))
    pw, ph = _W - _ML - _MR, _H - _MT - _MB
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
             f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
             f'<rect width="{_W}" height="{_H}" fill="white"/>']
    if title:
        parts.append(f'<text x="{_W / 2}" y="18" text-anchor="middle">{escape(title)}</text>')
    if not pos:
        parts.append(f'<text x="{_W / 2}" y="{_H / 2}" text-anchor="middle">no positive data</text>')
        parts.append("</svg>")
        return "\n".join(parts)
    ylo, yhi = math.log10(min(pos)), math.log10(max(pos))
    if yhi - ylo < 1e-9:
        ylo, yhi = ylo - 0.5, yhi + 0.5
    xmax = xmax if xmax > 0 else 1.0

    def sx(e):
        return _ML + pw * float(e) / xmax

    def sy(v):
        return _MT + ph * (yhi - math.log10(v)) / (yhi - ylo)

    parts.append(f'<rect x="{_ML}" y="{_MT}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    for t in _ticks(ylo, yhi):
        if ylo <= t <= yhi:
            y = sy(10.0 ** t)
            parts.append(f'<line x1="{_ML}" x2="{_ML + pw}" y1="{y:.2f}" y2="{y:.2f}" stroke="#ddd"/>')
            parts.append(f'<text x="{_ML - 6}" y="{y + 4:.2f}" text-anchor="end">1e{t}</text>')
    for j in range(6):
        e = xmax * j / 5
        parts.append(f'<text x="{sx(e):.2f}" y="{_MT + ph + 18}" text-anchor="middle">{e:.4g}</text>')
    parts.append(f'<text x="{_ML + pw / 2}" y="{_H - 10}" text-anchor="middle">epoch</text>')
    parts.append(f'<text x="16" y="{_MT + ph / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {_MT + ph / 2})">{escape(metric)}</text>')
    for idx, (method, (ep, mean, lo, hi)) in enumerate(curves.items()):
        color = _COLORS[idx % len(_COLORS)]
        ep = np.asarray(ep, dtype=float)
        lo, hi, mean = (np.asarray(a, dtype=float) for a in (lo, hi, mean))
        ok = (lo > 0) & (hi > 0) & np.isfinite(lo) & np.isfinite(hi)
        if ok.sum() >= 2:
            top = [f"{sx(e):.2f},{sy(v):.2f}" for e, v in zip(ep[ok], hi[ok])]
            bot = [f"{sx(e):.2f},{sy(v):.2f}" for e, v in zip(ep[ok][::-1], lo[ok][::-1])]
            parts.append(f'<polygon points="{" ".join(top + bot)}" fill="{color}" '
                         f'fill-opacity="0.18" stroke="none"/>')
        ok = (mean > 0) & np.isfinite(mean)
        if ok.any():
            pts = " ".join(f"{sx(e):.2f},{sy(v):.2f}" for e, v in zip(ep[ok], mean[ok]))
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.8"/>')
        ly = _MT + 16 + 18 * idx
        parts.append(f'<line x1="{_ML + pw + 12}" x2="{_ML + pw + 36}" y1="{ly}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{_ML + pw + 42}" y="{ly + 4}">{escape(method)}</text>')
    parts.append("</svg>")
    return "\n".join(parts)
