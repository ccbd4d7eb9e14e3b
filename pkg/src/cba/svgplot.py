"""Minimal SVG line plots with shaded confidence bands.

Hand-rolled on purpose: the output is deterministic, dependency-free and
uses a small structural subset of SVG 1.1 (rect, line, polyline, polygon,
text)."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

PALETTE = ["#377eb8", "#ff7f00", "#4daf4a", "#e41a1c",
           "#984ea3", "#a65628", "#999999"]

_WIDTH, _HEIGHT = 640, 420
_LEFT, _RIGHT, _TOP, _BOTTOM = 70, 20, 20, 50


def _fmt(x: float) -> str:
    return f"{x:.2f}".rstrip("0").rstrip(".")


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    return np.linspace(lo, hi, n)


def render_svg(curves, ylabel: str = "cumulative mistakes",
               title: str | None = None) -> str:
    """Render aggregate curves (objects with label/trials/mean/halfwidth)
    into an SVG document string."""
    curves = list(curves)
    if not curves or any(c.mean.size == 0 for c in curves):
        raise ValueError("nothing to plot")
    x_max = max(float(c.trials[-1]) for c in curves)
    y_vals = []
    for c in curves:
        top = c.mean + (c.halfwidth if c.halfwidth is not None else 0.0)
        bot = c.mean - (c.halfwidth if c.halfwidth is not None else 0.0)
        y_vals.append(float(np.max(top)))
        y_vals.append(float(np.min(bot)))
    y_max = max(max(y_vals), 1e-9)
    y_min = min(min(y_vals), 0.0)
    plot_w = _WIDTH - _LEFT - _RIGHT
    plot_h = _HEIGHT - _TOP - _BOTTOM

    def sx(x):
        return _LEFT + plot_w * x / x_max

    def sy(y):
        return _TOP + plot_h * (1.0 - (y - y_min) / (y_max - y_min))

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{_WIDTH / 2:.0f}" y="14" text-anchor="middle" '
                   f'font-size="13">{escape(title)}</text>')
    # axes
    out.append(f'<line x1="{_LEFT}" y1="{_TOP}" x2="{_LEFT}" '
               f'y2="{_TOP + plot_h}" stroke="black"/>')
    out.append(f'<line x1="{_LEFT}" y1="{_TOP + plot_h}" '
               f'x2="{_LEFT + plot_w}" y2="{_TOP + plot_h}" stroke="black"/>')
    for tick in _ticks(0.0, x_max):
        px = sx(tick)
        out.append(f'<line x1="{px:.2f}" y1="{_TOP + plot_h}" x2="{px:.2f}" '
                   f'y2="{_TOP + plot_h + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{_TOP + plot_h + 18}" '
                   f'text-anchor="middle" font-size="11">{_fmt(tick)}</text>')
    for tick in _ticks(y_min, y_max):
        py = sy(tick)
        out.append(f'<line x1="{_LEFT - 5}" y1="{py:.2f}" x2="{_LEFT}" '
                   f'y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{_LEFT - 8}" y="{py + 4:.2f}" '
                   f'text-anchor="end" font-size="11">{_fmt(tick)}</text>')
    out.append(f'<text x="{_LEFT + plot_w / 2:.0f}" y="{_HEIGHT - 12}" '
               f'text-anchor="middle" font-size="12">trials</text>')
    out.append(f'<text x="16" y="{_TOP + plot_h / 2:.0f}" text-anchor="middle" '
               f'font-size="12" transform="rotate(-90 16 {_TOP + plot_h / 2:.0f})">'
               f'{escape(ylabel)}</text>')

    for i, curve in enumerate(curves):
        color = PALETTE[i % len(PALETTE)]
        xs = curve.trials.astype(float)
        if curve.halfwidth is not None:
            upper = curve.mean + curve.halfwidth
            lower = curve.mean - curve.halfwidth
            pts = [f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, upper)]
            pts += [f"{sx(x):.2f},{sy(y):.2f}"
                    for x, y in zip(xs[::-1], lower[::-1])]
            out.append(f'<polygon points="{" ".join(pts)}" fill="{color}" '
                       f'fill-opacity="0.2" stroke="none"/>')
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}"
                       for x, y in zip(xs, curve.mean))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"/>')
        ly = _TOP + 16 + 16 * i
        lx = _LEFT + plot_w - 150
        out.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 24}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{lx + 30}" y="{ly}" font-size="11">'
                   f'{escape(curve.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
