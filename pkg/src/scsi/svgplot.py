"""Minimal native SVG plotting: line series, scatter points, log axes.

CSV files are the source of truth for every experiment; these plots are
lightweight companions, rendered without external plotting dependencies.
"""

from __future__ import annotations

import math

__all__ = ["Series", "render_plot"]

_PALETTE = ("#d62728", "#2ca02c", "#1f77b4", "#ff7f0e", "#9467bd", "#8c564b")

_W, _H = 640, 480
_ML, _MR, _MT, _MB = 70, 20, 40, 50


class Series:
    def __init__(self, xs, ys, name="", kind="line", dashed=False, color=None):
        self.xs = [float(v) for v in xs]
        self.ys = [float(v) for v in ys]
        self.name = name
        self.kind = kind  # "line" | "points"
        self.dashed = dashed
        self.color = color


def _ticks_linear(lo, hi):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / 4))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 6:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-12 * span:
        ticks.append(v)
        v += step
    return ticks


def _ticks_log(lo, hi):
    lo_e = math.floor(math.log10(lo))
    hi_e = math.ceil(math.log10(hi))
    return [10.0**e for e in range(lo_e, hi_e + 1)]


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1e4 or abs(v) < 1e-3:
        return f"{v:.0e}"
    return f"{v:g}"


def render_plot(
    path,
    series,
    title="",
    xlabel="",
    ylabel="",
    log_x=False,
    log_y=False,
    diagonal=False,
):
    """Write an SVG with the given series. Log axes drop nonpositive values."""
    xs_all, ys_all = [], []
    for s in series:
        for x, y in zip(s.xs, s.ys):
            if (log_x and x <= 0) or (log_y and y <= 0):
                continue
            xs_all.append(x)
            ys_all.append(y)
    if not xs_all:
        xs_all, ys_all = [1.0], [1.0]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if diagonal:
        both_lo = min(x_lo, y_lo)
        both_hi = max(x_hi, y_hi)
        x_lo = y_lo = both_lo
        x_hi = y_hi = both_hi
    if not log_x and x_lo == x_hi:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    if not log_y and y_lo == y_hi:
        y_lo, y_hi = y_lo - 1, y_hi + 1
    if log_x and x_lo == x_hi:
        x_hi = x_lo * 10

    def tx(v):
        if log_x:
            f = (math.log10(v) - math.log10(x_lo)) / (math.log10(x_hi) - math.log10(x_lo))
        else:
            f = (v - x_lo) / (x_hi - x_lo)
        return _ML + f * (_W - _ML - _MR)

    def ty(v):
        if log_y:
            f = (math.log10(v) - math.log10(y_lo)) / (math.log10(y_hi) - math.log10(y_lo))
        else:
            f = (v - y_lo) / (y_hi - y_lo)
        return _H - _MB - f * (_H - _MT - _MB)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W/2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
    ]
    x_ticks = _ticks_log(x_lo, x_hi) if log_x else _ticks_linear(x_lo, x_hi)
    y_ticks = _ticks_log(y_lo, y_hi) if log_y else _ticks_linear(y_lo, y_hi)
    for v in x_ticks:
        if v < x_lo or v > x_hi:
            continue
        px = tx(v)
        out.append(
            f'<line x1="{px:.1f}" y1="{_MT}" x2="{px:.1f}" y2="{_H-_MB}" stroke="#eee"/>'
        )
        out.append(
            f'<text x="{px:.1f}" y="{_H-_MB+16}" text-anchor="middle">{_fmt(v)}</text>'
        )
    for v in y_ticks:
        if v < y_lo or v > y_hi:
            continue
        py = ty(v)
        out.append(
            f'<line x1="{_ML}" y1="{py:.1f}" x2="{_W-_MR}" y2="{py:.1f}" stroke="#eee"/>'
        )
        out.append(
            f'<text x="{_ML-6}" y="{py+4:.1f}" text-anchor="end">{_fmt(v)}</text>'
        )
    out.append(
        f'<rect x="{_ML}" y="{_MT}" width="{_W-_ML-_MR}" height="{_H-_MT-_MB}" '
        f'fill="none" stroke="black"/>'
    )
    out.append(
        f'<text x="{_W/2}" y="{_H-12}" text-anchor="middle">{xlabel}</text>'
    )
    out.append(
        f'<text x="16" y="{_H/2}" text-anchor="middle" '
        f'transform="rotate(-90 16 {_H/2})">{ylabel}</text>'
    )
    if diagonal:
        out.append(
            f'<line x1="{tx(x_lo):.1f}" y1="{ty(y_lo):.1f}" x2="{tx(x_hi):.1f}" '
            f'y2="{ty(y_hi):.1f}" stroke="red" stroke-dasharray="6 3"/>'
        )
    legend_y = _MT + 14
    for i, s in enumerate(series):
        color = s.color or _PALETTE[i % len(_PALETTE)]
        pts = [
            (tx(x), ty(y))
            for x, y in zip(s.xs, s.ys)
            if not ((log_x and x <= 0) or (log_y and y <= 0))
        ]
        if s.kind == "points":
            for px, py in pts:
                out.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="2" fill="{color}" fill-opacity="0.5"/>')
        else:
            path_d = " ".join(f"{px:.1f},{py:.1f}" for px, py in pts)
            dash = ' stroke-dasharray="6 3"' if s.dashed else ""
            out.append(f'<polyline points="{path_d}" fill="none" stroke="{color}"{dash}/>')
        if s.name:
            legend_dash = ' stroke-dasharray="6 3"' if s.dashed else ""
            out.append(
                f'<line x1="{_W-_MR-130}" y1="{legend_y-4}" x2="{_W-_MR-110}" y2="{legend_y-4}" '
                f'stroke="{color}"{legend_dash}/>'
            )
            out.append(f'<text x="{_W-_MR-105}" y="{legend_y}">{s.name}</text>')
            legend_y += 16
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out))
