"""Minimal static SVG line charts (log-scale y) with optional shaded bands."""
from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 30, 50
FLOOR = 1e-16


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _log(v):
    return math.log10(max(v, FLOOR))


def line_chart(series, path, title="", xlabel="", ylabel=""):
    """Write an SVG with one polyline per series.

    ``series`` is a list of dicts with keys ``label``, ``x``, ``y`` and
    optionally ``lo`` / ``hi`` (band edges drawn as a translucent polygon).
    """
    xs = [x for s in series for x in s["x"]]
    ys = [v for s in series for key in ("y", "lo", "hi") for v in s.get(key, [])]
    x0, x1 = (min(xs), max(xs)) if xs else (0.0, 1.0)
    if x1 <= x0:
        x1 = x0 + 1.0
    ly = [_log(v) for v in ys] or [0.0]
    y0, y1 = math.floor(min(ly)), math.ceil(max(ly))
    if y1 <= y0:
        y1 = y0 + 1
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def py(y):
        return TOP + ph - (_log(y) - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="18" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>',
    ]
    for e in range(y0, y1 + 1):
        yy = TOP + ph - (e - y0) / (y1 - y0) * ph
        out.append(f'<line x1="{LEFT - 4}" y1="{_fmt(yy)}" x2="{LEFT}" y2="{_fmt(yy)}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 6}" y="{_fmt(yy + 4)}" text-anchor="end" font-size="10">1e{e}</text>')
    for frac in (0.0, 0.5, 1.0):
        xv = x0 + frac * (x1 - x0)
        out.append(f'<text x="{_fmt(px(xv))}" y="{TOP + ph + 16}" text-anchor="middle" '
                   f'font-size="10">{xv:.3g}</text>')
    out.append(f'<text x="{LEFT + pw / 2}" y="{HEIGHT - 10}" text-anchor="middle" '
               f'font-size="12">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{TOP + ph / 2}" text-anchor="middle" font-size="12" '
               f'transform="rotate(-90 14 {TOP + ph / 2})">{escape(ylabel)}</text>')
    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        label = escape(str(s.get("label", "")))
        if "lo" in s and "hi" in s:
            pts = [(px(x), py(v)) for x, v in zip(s["x"], s["hi"])]
            pts += [(px(x), py(v)) for x, v in reversed(list(zip(s["x"], s["lo"])))]
            coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in pts)
            out.append(f'<polygon class="band" data-label="{label}" points="{coords}" '
                       f'fill="{color}" fill-opacity="0.2" stroke="none"/>')
        coords = " ".join(f"{_fmt(px(x))},{_fmt(py(v))}" for x, v in zip(s["x"], s["y"]))
        out.append(f'<polyline data-label="{label}" points="{coords}" fill="none" '
                   f'stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{LEFT + pw - 4}" y="{TOP + 14 + 14 * i}" text-anchor="end" '
                   f'font-size="11" fill="{color}">{label}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
