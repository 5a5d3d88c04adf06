"""Minimal SVG line plots: polylines and axes, nothing else.

Drawn coordinates are pixel positions, but every polyline also carries its
data in a ``data-points`` attribute written with ``repr(float)``, the same
formatting the CSV writers use, so the plotted numbers can be checked
against the CSV files exactly.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 480
MARGIN = 60
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    color: str | None = None
    dashed: bool = False
    markers: bool = False


def _nice_ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((s * mag for s in (1, 2, 5, 10) if s * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _range(values) -> tuple[float, float]:
    v = np.concatenate([np.ravel(a) for a in values]) if values else np.array([0.0])
    v = v[np.isfinite(v)]
    if v.size == 0:
        return 0.0, 1.0
    lo, hi = float(v.min()), float(v.max())
    if hi == lo:
        pad = abs(lo) * 0.05 or 0.5
        return lo - pad, hi + pad
    pad = 0.03 * (hi - lo)
    return lo - pad, hi + pad


def line_plot(series: list[Series], xlabel: str = "", ylabel: str = "", title: str = "",
              metadata: dict | None = None) -> str:
    """Render ``series`` to an SVG document string.

    Non-finite values split a polyline into separate pieces.
    """
    x0, x1 = _range([s.x for s in series])
    y0, y1 = _range([s.y for s in series])
    pw, ph = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def px(x):
        return MARGIN + (x - x0) / (x1 - x0) * pw

    def py(y):
        return HEIGHT - MARGIN - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">']
    if metadata:
        out.append("<metadata>")
        out.extend(f"{escape(str(k))}: {escape(str(v))}" for k, v in metadata.items())
        out.append("</metadata>")
    out.append(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    # axes
    out.append(f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
               f'y2="{HEIGHT - MARGIN}" stroke="black"/>')
    out.append(f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>')
    for t in _nice_ticks(x0, x1):
        X = px(t)
        out.append(f'<line x1="{X:.2f}" y1="{HEIGHT - MARGIN}" x2="{X:.2f}" y2="{HEIGHT - MARGIN + 5}" '
                   f'stroke="black"/>')
        out.append(f'<text x="{X:.2f}" y="{HEIGHT - MARGIN + 18}" text-anchor="middle">{t:.4g}</text>')
    for t in _nice_ticks(y0, y1):
        Y = py(t)
        out.append(f'<line x1="{MARGIN - 5}" y1="{Y:.2f}" x2="{MARGIN}" y2="{Y:.2f}" stroke="black"/>')
        out.append(f'<text x="{MARGIN - 8}" y="{Y + 4:.2f}" text-anchor="end">{t:.4g}</text>')
    if xlabel:
        out.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="15" y="{HEIGHT / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 15 {HEIGHT / 2})">{escape(ylabel)}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2}" y="25" text-anchor="middle" font-size="14">{escape(title)}</text>')

    for i, s in enumerate(series):
        color = s.color or PALETTE[i % len(PALETTE)]
        x, y = np.asarray(s.x, dtype=float), np.asarray(s.y, dtype=float)
        ok = np.isfinite(x) & np.isfinite(y)
        # split at gaps so missing values do not get bridged
        pieces, cur = [], []
        for xi, yi, good in zip(x, y, ok):
            if good:
                cur.append((xi, yi))
            elif cur:
                pieces.append(cur)
                cur = []
        if cur:
            pieces.append(cur)
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        for piece in pieces:
            data = " ".join(f"{repr(float(a))},{repr(float(b))}" for a, b in piece)
            if s.markers:
                for a, b in piece:
                    out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.5" fill="{color}" '
                               f'data-point="{repr(float(a))},{repr(float(b))}"/>')
            if len(piece) > 1 or not s.markers:
                pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in piece)
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} '
                           f'data-label="{escape(s.label)}" data-points="{data}" points="{pts}"/>')
        ly = MARGIN + 16 * i
        out.append(f'<line x1="{WIDTH - MARGIN - 120}" y1="{ly}" x2="{WIDTH - MARGIN - 100}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"{dash}/>')
        out.append(f'<text x="{WIDTH - MARGIN - 95}" y="{ly + 4}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def polyline_data(svg_text: str) -> dict[str, list[tuple[float, float]]]:
    """Recover ``label -> [(x, y), ...]`` from the ``data-points`` attributes."""
    found: dict[str, list[tuple[float, float]]] = {}
    for m in re.finditer(r'data-label="([^"]*)" data-points="([^"]*)"', svg_text):
        pts = [tuple(float(v) for v in pair.split(",")) for pair in m.group(2).split()]
        found.setdefault(m.group(1), []).extend(pts)
    return found
