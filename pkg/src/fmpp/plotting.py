"""Static SVG line plots with an optional envelope band.

The output is plain SVG 1.1 text built by hand so that identical input gives
byte-identical output. Non-finite y values break a line into segments.
"""
from __future__ import annotations

from typing import Mapping, Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import EmptySeries, InvalidArgument

__all__ = ["plot_svg"]

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=20, top=40, bottom=55)
COLORS = ("#1f3b73", "#b3001b", "#2a7f2a", "#7a4a00")
BAND_FILL = "#c8c8c8"


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


def _runs(x, y):
    """Split into maximal runs of finite points."""
    ok = np.isfinite(x) & np.isfinite(y)
    out, cur = [], []
    for i in range(len(x)):
        if ok[i]:
            cur.append(i)
        elif cur:
            out.append(cur)
            cur = []
    if cur:
        out.append(cur)
    return out


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10.0 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = np.ceil(lo / step) * step
    return [float(v) for v in np.arange(start, hi + step * 1e-9, step)]


def plot_svg(
    series: Sequence,
    band: Optional[Sequence] = None,
    labels: Optional[Mapping[str, str]] = None,
) -> str:
    """Render line series and an optional shaded band as an SVG document.

    ``series`` is a sequence of ``(x, y)`` or ``(x, y, name)`` tuples.
    ``band`` is ``(x, lo, hi)``; where ``lo == hi`` it collapses to a line.
    ``labels`` may hold ``title``, ``xlabel`` and ``ylabel``.
    """
    if not series:
        raise EmptySeries("nothing to plot")
    labels = dict(labels or {})
    prepared = []
    for k, s in enumerate(series):
        x = np.asarray(s[0], dtype=float)
        y = np.asarray(s[1], dtype=float)
        if x.shape != y.shape or x.ndim != 1:
            raise InvalidArgument("series x and y must be 1-d arrays of equal length")
        if len(x) == 0:
            raise EmptySeries(f"series {k} is empty")
        name = s[2] if len(s) > 2 else f"series {k + 1}"
        prepared.append((x, y, str(name)))
    if band is not None:
        bx, blo, bhi = (np.asarray(a, dtype=float) for a in band)
        if not (bx.shape == blo.shape == bhi.shape):
            raise InvalidArgument("band arrays must have equal length")

    xs = np.concatenate([s[0] for s in prepared] + ([bx] if band is not None else []))
    ys = np.concatenate([s[1] for s in prepared] + ([blo, bhi] if band is not None else []))
    xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
    if len(xs) == 0 or len(ys) == 0:
        raise EmptySeries("no finite values to plot")
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        pad = 0.5 if y0 == 0 else abs(y0) * 0.1
        y0, y1 = y0 - pad, y1 + pad
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def sx(v):
        return MARGIN["left"] + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return MARGIN["top"] + (1.0 - (v - y0) / (y1 - y0)) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
    ]
    if "title" in labels:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="24" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="15">{escape(labels["title"])}</text>')

    if band is not None:
        for run in _runs(bx, np.where(np.isfinite(blo) & np.isfinite(bhi), blo, np.nan)):
            if np.allclose(blo[run], bhi[run]):
                pts = " ".join(f"{_fmt(sx(bx[i]))},{_fmt(sy(blo[i]))}" for i in run)
                out.append(f'<polyline class="band" points="{pts}" fill="none" stroke="{BAND_FILL}" stroke-width="2"/>')
                continue
            upper = [f"{_fmt(sx(bx[i]))},{_fmt(sy(bhi[i]))}" for i in run]
            lower = [f"{_fmt(sx(bx[i]))},{_fmt(sy(blo[i]))}" for i in reversed(run)]
            out.append(f'<polygon class="band" points="{" ".join(upper + lower)}" fill="{BAND_FILL}" '
                       f'stroke="{BAND_FILL}" stroke-width="1"/>')

    # axes and ticks
    ax_y = MARGIN["top"] + ph
    out.append(f'<line x1="{MARGIN["left"]}" y1="{ax_y}" x2="{MARGIN["left"] + pw}" y2="{ax_y}" stroke="#000000"/>')
    out.append(f'<line x1="{MARGIN["left"]}" y1="{MARGIN["top"]}" x2="{MARGIN["left"]}" y2="{ax_y}" stroke="#000000"/>')
    for t in _ticks(x0, x1):
        px = _fmt(sx(t))
        out.append(f'<line x1="{px}" y1="{ax_y}" x2="{px}" y2="{ax_y + 5}" stroke="#000000"/>')
        out.append(f'<text x="{px}" y="{ax_y + 18}" text-anchor="middle" font-family="sans-serif" '
                   f'font-size="11">{_tick_label(t)}</text>')
    for t in _ticks(y0, y1):
        py = _fmt(sy(t))
        out.append(f'<line x1="{MARGIN["left"] - 5}" y1="{py}" x2="{MARGIN["left"]}" y2="{py}" stroke="#000000"/>')
        out.append(f'<text x="{MARGIN["left"] - 8}" y="{py}" text-anchor="end" dominant-baseline="middle" '
                   f'font-family="sans-serif" font-size="11">{_tick_label(t)}</text>')
    if "xlabel" in labels:
        out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="13">{escape(labels["xlabel"])}</text>')
    if "ylabel" in labels:
        cy = MARGIN["top"] + ph / 2
        out.append(f'<text x="16" y="{cy:.1f}" text-anchor="middle" font-family="sans-serif" font-size="13" '
                   f'transform="rotate(-90 16 {cy:.1f})">{escape(labels["ylabel"])}</text>')

    for k, (x, y, name) in enumerate(prepared):
        color = COLORS[k % len(COLORS)]
        for run in _runs(x, y):
            pts = " ".join(f"{_fmt(sx(x[i]))},{_fmt(sy(y[i]))}" for i in run)
            out.append(f'<polyline class="series" points="{pts}" fill="none" stroke="{color}" stroke-width="1.8">'
                       f"<title>{escape(name)}</title></polyline>")
        ly = MARGIN["top"] + 14 + 16 * k
        lx = MARGIN["left"] + pw - 120
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="1.8"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}" dominant-baseline="middle" font-family="sans-serif" '
                   f'font-size="11">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
