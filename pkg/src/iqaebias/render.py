"""Minimal SVG heatmap of conditional-bias cells with an optional scatter overlay."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

NAN_FILL = "#ffffff"
_NEG = (33, 102, 172)
_MID = (247, 247, 247)
_POS = (178, 24, 43)

WIDTH, HEIGHT = 640, 480
MARGIN = dict(left=70, right=90, top=30, bottom=50)


def _mix(c0, c1, t):
    return tuple(round(a + (b - a) * t) for a, b in zip(c0, c1))


def diverging_color(value: float, vmax: float) -> str:
    """Linear two-sided map: blue for negative, red for positive, NaN white."""
    if value is None or math.isnan(value):
        return NAN_FILL
    if vmax <= 0:
        return "#%02x%02x%02x" % _MID
    t = max(-1.0, min(1.0, value / vmax))
    rgb = _mix(_MID, _POS, t) if t >= 0 else _mix(_MID, _NEG, -t)
    return "#%02x%02x%02x" % rgb


def _edges(centers: Sequence[float], lo: float | None = None, hi: float | None = None) -> list[float]:
    if len(centers) == 1:
        c = centers[0]
        return [c - 0.5, c + 0.5]
    mids = [(a + b) / 2 for a, b in zip(centers[:-1], centers[1:])]
    first = centers[0] - (mids[0] - centers[0])
    last = centers[-1] + (centers[-1] - mids[-1])
    if lo is not None:
        first = max(first, lo)
    if hi is not None:
        last = min(last, hi)
    return [first, *mids, last]


def heatmap_svg(cells: Sequence[tuple[int, float, float]],
                points: Sequence[tuple[int, float]] = (),
                title: str = "") -> str:
    """Render ``(k_fin, f_fin, b_tilde)`` cells as an SVG string.

    ``points`` are ``(k_fin, f_fin)`` pairs drawn as translucent black dots.
    """
    ks = sorted({int(k) for k, _, _ in cells})
    fs = sorted({float(f) for _, f, _ in cells})
    if not ks or not fs:
        raise ValueError("no cells to render")
    k_edges = _edges([float(k) for k in ks])
    f_edges = _edges(fs, 0.0, 1.0)
    finite = [abs(b) for _, _, b in cells if not math.isnan(b)]
    vmax = max(finite) if finite else 0.0

    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]

    def sx(k):
        return x0 + (k - k_edges[0]) / (k_edges[-1] - k_edges[0]) * (x1 - x0)

    def sy(f):
        return y0 + (f - f_edges[0]) / (f_edges[-1] - f_edges[0]) * (y1 - y0)

    k_index = {k: i for i, k in enumerate(ks)}
    f_index = {f: j for j, f in enumerate(fs)}
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        '<g class="cells" shape-rendering="crispEdges">',
    ]
    for k, f, b in cells:
        i, j = k_index[int(k)], f_index[float(f)]
        xa, xb = sx(k_edges[i]), sx(k_edges[i + 1])
        ya, yb = sy(f_edges[j + 1]), sy(f_edges[j])
        out.append(
            f'<rect x="{xa:.2f}" y="{ya:.2f}" width="{xb - xa:.2f}" height="{yb - ya:.2f}" '
            f'fill="{diverging_color(b, vmax)}"/>')
    out.append("</g>")

    if points:
        out.append('<g class="points" fill="#000000" fill-opacity="0.05">')
        for k, f in points:
            if k_edges[0] <= k <= k_edges[-1]:
                out.append(f'<circle cx="{sx(k):.2f}" cy="{sy(f):.2f}" r="1.5"/>')
        out.append("</g>")

    # frame, axis labels, colour bar
    out.append(f'<rect x="{x0}" y="{y1}" width="{x1 - x0}" height="{y0 - y1}" '
               'fill="none" stroke="#000000"/>')
    out.append(f'<text x="{(x0 + x1) / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle" '
               'font-size="14">k_fin</text>')
    out.append(f'<text x="18" y="{(y0 + y1) / 2:.0f}" text-anchor="middle" font-size="14" '
               f'transform="rotate(-90 18 {(y0 + y1) / 2:.0f})">f_fin</text>')
    for k in (ks[0], ks[-1]):
        out.append(f'<text x="{sx(k):.1f}" y="{y0 + 16}" text-anchor="middle" '
                   f'font-size="11">{k}</text>')
    for f in (0.0, 0.5, 1.0):
        if f_edges[0] <= f <= f_edges[-1]:
            out.append(f'<text x="{x0 - 6}" y="{sy(f) + 4:.1f}" text-anchor="end" '
                       f'font-size="11">{f:g}</text>')
    bx = x1 + 25
    steps = 50
    for s in range(steps):
        v = vmax * (1 - 2 * (s + 0.5) / steps)
        y = y1 + (y0 - y1) * s / steps
        out.append(f'<rect x="{bx}" y="{y:.2f}" width="16" height="{(y0 - y1) / steps + 0.5:.2f}" '
                   f'fill="{diverging_color(v, vmax)}"/>')
    out.append(f'<text x="{bx + 20}" y="{y1 + 10}" font-size="10">{vmax:.2e}</text>')
    out.append(f'<text x="{bx + 20}" y="{y0}" font-size="10">{-vmax:.2e}</text>')
    if title:
        out.append(f'<text x="{(x0 + x1) / 2:.0f}" y="20" text-anchor="middle" '
                   f'font-size="14">{escape(title)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
