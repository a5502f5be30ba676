"""Minimal static SVG line charts (linear axes, one polyline per curve)."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["line_chart", "nice_ticks"]

_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def nice_ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    """Round tick positions covering ``[lo, hi]``."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(count - 1, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(round(t / step) * step)
        t += step
    return ticks


def _segments(x: np.ndarray, y: np.ndarray):
    ok = np.isfinite(x) & np.isfinite(y)
    start = None
    for i, good in enumerate(ok):
        if good and start is None:
            start = i
        elif not good and start is not None:
            yield start, i
            start = None
    if start is not None:
        yield start, len(ok)


def line_chart(curves: dict[str, tuple], title: str, xlabel: str, ylabel: str,
               width: int = 800, height: int = 500) -> str:
    """Render ``{label: (x, y)}`` as an SVG document string.

    Non-finite points split a curve into separate polylines. A curve with a
    single point is drawn as a dot so the file stays meaningful.
    """
    left, right, top, bottom = 70, 150, 40, 50
    pw, ph = width - left - right, height - top - bottom
    data = {k: (np.asarray(x, float), np.asarray(y, float)) for k, (x, y) in curves.items()}
    xs = np.concatenate([x[np.isfinite(x) & np.isfinite(y)] for x, y in data.values()] or [np.empty(0)])
    ys = np.concatenate([y[np.isfinite(x) & np.isfinite(y)] for x, y in data.values()] or [np.empty(0)])
    if xs.size:
        x0, x1 = float(xs.min()), float(xs.max())
        y0, y1 = float(ys.min()), float(ys.max())
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        pad = abs(y0) * 0.05 or 0.5
        y0, y1 = y0 - pad, y1 + pad

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in nice_ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{top + ph}" x2="{X:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{top + ph + 18}" text-anchor="middle">{t:g}</text>')
    for t in nice_ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{left - 5}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{Y + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>')

    for k, (label, (x, y)) in enumerate(data.items()):
        color = _PALETTE[k % len(_PALETTE)]
        for a, b in _segments(x, y):
            if b - a == 1:
                out.append(f'<circle cx="{px(x[a]):.2f}" cy="{py(y[a]):.2f}" r="2" fill="{color}"/>')
                continue
            pts = " ".join(f"{px(u):.2f},{py(v):.2f}" for u, v in zip(x[a:b], y[a:b]))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1"/>')
        ly = top + 12 + 14 * k
        if ly < top + ph:
            lx = left + pw + 10
            out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 18}" y2="{ly - 4}" stroke="{color}"/>')
            out.append(f'<text x="{lx + 22}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
