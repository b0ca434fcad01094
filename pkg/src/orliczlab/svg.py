"""Minimal SVG line plot of rho_eps against eps."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = (70, 30, 40, 60)  # left, right, top, bottom


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    return [lo + (hi - lo) * k / (count - 1) for k in range(count)]


def convergence_svg(eps, values, target: float | None = None, title: str = "",
                    ylabel: str = "rho_eps", extrapolated: float | None = None) -> str:
    """Polyline of ``values`` against ``log10(eps)`` with an optional target line."""
    pts = [(math.log10(e), v) for e, v in zip(eps, values) if e > 0 and math.isfinite(v)]
    ys = [v for _, v in pts]
    for extra in (target, extrapolated):
        if extra is not None and math.isfinite(extra):
            ys.append(extra)
    xs = [x for x, _ in pts] or [0.0]
    ys = ys or [0.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    pad = 0.08 * (y_hi - y_lo) if y_hi > y_lo else max(abs(y_hi), 1.0) * 0.1
    y_lo, y_hi = y_lo - pad, y_hi + pad
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom

    def sx(x):
        return left + (x - x_lo) / (x_hi - x_lo) * pw

    def sy(y):
        return top + (y_hi - y) / (y_hi - y_lo) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for y in _ticks(y_lo, y_hi):
        out.append(f'<line x1="{left - 4}" y1="{sy(y):.2f}" x2="{left}" y2="{sy(y):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{sy(y) + 4:.2f}" text-anchor="end">{_fmt(y)}</text>')
    for x, _ in pts:
        out.append(f'<line x1="{sx(x):.2f}" y1="{top + ph}" x2="{sx(x):.2f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{sx(x):.2f}" y="{top + ph + 18}" text-anchor="middle">{_fmt(10 ** x)}</text>')
    out.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 12}" text-anchor="middle">eps (log scale)</text>')
    out.append(f'<text x="16" y="{top + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 16 {top + ph / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{left + pw / 2}" y="{top - 14}" text-anchor="middle">{escape(title)}</text>')
    if target is not None and math.isfinite(target):
        y = sy(target)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" '
                   f'stroke="firebrick" stroke-dasharray="6 4"/>')
        out.append(f'<text x="{left + pw - 4}" y="{y - 5:.2f}" text-anchor="end" fill="firebrick">'
                   f'target {_fmt(target)}</text>')
    if extrapolated is not None and math.isfinite(extrapolated):
        out.append(f'<circle cx="{left + 6}" cy="{sy(extrapolated):.2f}" r="4" fill="none" stroke="seagreen"/>')
    if pts:
        path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="steelblue" stroke-width="2"/>')
        for x, y in pts:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="steelblue"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
