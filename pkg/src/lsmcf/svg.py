"""Minimal deterministic SVG line charts.

Output depends only on the data (fixed number formatting, no timestamps), so
identical inputs give byte-identical files.
"""

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=150, top=40, bottom=50)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf", "#7f7f7f")


def _fmt(v):
    return f"{v:.2f}"


def _ticks(lo, hi, count=5):
    if hi <= lo:
        return [lo]
    return list(np.linspace(lo, hi, count))


def _range(values):
    finite = [v for v in values if np.isfinite(v)]
    if not finite:
        return 0.0, 1.0
    lo, hi = min(finite), max(finite)
    if hi - lo < 1e-300 * max(1.0, abs(hi)):
        pad = 0.5 * abs(hi) if hi != 0 else 0.5
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def line_chart(path, title, xlabel, ylabel, series, dashed=()):
    """Write an SVG with one polyline per ``(label, xs, ys)`` entry of ``series``.

    Labels listed in ``dashed`` are drawn with a dashed stroke (e.g. exact laws).
    """
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys]
    x0, x1 = _range(xs_all)
    y0, y1 = _range(ys_all)
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(x):
        return MARGIN["left"] + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return MARGIN["top"] + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
        'fill="none" stroke="#333"/>',
    ]
    for t in _ticks(x0, x1):
        X = sx(t)
        out.append(f'<line x1="{_fmt(X)}" y1="{MARGIN["top"] + ph}" x2="{_fmt(X)}" '
                   f'y2="{MARGIN["top"] + ph + 5}" stroke="#333"/>')
        out.append(f'<text x="{_fmt(X)}" y="{MARGIN["top"] + ph + 18}" '
                   f'text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        Y = sy(t)
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{_fmt(Y)}" x2="{MARGIN["left"]}" '
                   f'y2="{_fmt(Y)}" stroke="#333"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{_fmt(Y + 4)}" '
                   f'text-anchor="end">{t:.4g}</text>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.0f}" y="{HEIGHT - 10}" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(16 {MARGIN["top"] + ph / 2:.0f}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    for k, (label, xs, ys) in enumerate(series):
        colour = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs, ys) if np.isfinite(y))
        dash = ' stroke-dasharray="6 4"' if label in dashed else ""
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.6"{dash} points="{pts}"/>')
        ly = MARGIN["top"] + 14 + 18 * k
        lx = WIDTH - MARGIN["right"] + 12
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 20}" y2="{ly - 4}" '
                   f'stroke="{colour}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 26}" y="{ly}">{escape(label)}</text>')
    out.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(out) + "\n")
    return path
