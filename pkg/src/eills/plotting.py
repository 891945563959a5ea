"""Dependency-free SVG line charts.

Output is a pure function of the inputs, so charts can be diffed in tests.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

from .exceptions import ValidationError

PALETTE = ("#1f77b4", "#d62728", "#ff7f0e", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _n(v):
    return f"{v:.2f}"


def _ticks(lo, hi, log):
    if log:
        a, b = math.floor(lo), math.ceil(hi)
        return [float(k) for k in range(a, b + 1)] if b > a else [float(a)]
    if hi == lo:
        return [lo]
    raw = (hi - lo) / 5
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    out, t = [], start
    while t <= hi + 1e-9 * step:
        out.append(round(t, 12))
        t += step
    return out


def emit_svg(series, path=None, title="", xlabel="", ylabel="", logx=False, logy=False, width=640, height=420):
    """Render ``{name: (xs, ys)}`` as an SVG line chart, one polyline per series.

    Returns the SVG text and writes it to ``path`` when given.
    """
    if not series:
        raise ValidationError("no series to plot")
    pts = {}
    for name, (xs, ys) in series.items():
        xs, ys = [float(v) for v in xs], [float(v) for v in ys]
        if len(xs) != len(ys) or not xs:
            raise ValidationError(f"series {name!r} needs equally many x and y values")
        for v in xs + ys:
            if not math.isfinite(v):
                raise ValidationError(f"series {name!r} has a non-finite value")
        if logx and min(xs) <= 0:
            raise ValidationError(f"series {name!r}: log-x axis needs positive x")
        if logy and min(ys) <= 0:
            raise ValidationError(f"series {name!r}: log-y axis needs positive y")
        tx = [math.log10(v) for v in xs] if logx else xs
        ty = [math.log10(v) for v in ys] if logy else ys
        pts[name] = list(zip(tx, ty))

    allx = [x for p in pts.values() for x, _ in p]
    ally = [y for p in pts.values() for _, y in p]
    x0, x1 = min(allx), max(allx)
    y0, y1 = min(ally), max(ally)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5

    left, right, top, bottom = 70, 170, 40, 55
    pw, ph = width - left - right, height - top - bottom

    def sx(v):
        return left + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t in _ticks(x0, x1, logx):
        if x0 <= t <= x1:
            label = f"1e{int(t)}" if logx else f"{t:g}"
            out.append(f'<line x1="{_n(sx(t))}" y1="{top + ph}" x2="{_n(sx(t))}" y2="{top + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{_n(sx(t))}" y="{top + ph + 18}" font-size="11" text-anchor="middle">{label}</text>')
    for t in _ticks(y0, y1, logy):
        if y0 <= t <= y1:
            label = f"1e{int(t)}" if logy else f"{t:g}"
            out.append(f'<line x1="{left - 5}" y1="{_n(sy(t))}" x2="{left}" y2="{_n(sy(t))}" stroke="black"/>')
            out.append(f'<text x="{left - 8}" y="{_n(sy(t) + 4)}" font-size="11" text-anchor="end">{label}</text>')
    if title:
        out.append(f'<text x="{left + pw / 2:.2f}" y="22" font-size="14" text-anchor="middle">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2:.2f}" y="{height - 12}" font-size="12" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        cy = top + ph / 2
        out.append(
            f'<text x="16" y="{cy:.2f}" font-size="12" text-anchor="middle" '
            f'transform="rotate(-90 16 {cy:.2f})">{escape(ylabel)}</text>'
        )
    for i, (name, p) in enumerate(pts.items()):
        colour = PALETTE[i % len(PALETTE)]
        coords = " ".join(f"{_n(sx(x))},{_n(sy(y))}" for x, y in p)
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2" points="{coords}"/>')
        ly = top + 14 + 18 * i
        out.append(f'<line x1="{left + pw + 12}" y1="{ly}" x2="{left + pw + 32}" y2="{ly}" stroke="{colour}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw + 38}" y="{ly + 4}" font-size="11">{escape(str(name))}</text>')
    out.append("</svg>")
    text = "\n".join(out) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
