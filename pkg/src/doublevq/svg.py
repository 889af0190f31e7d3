"""Minimal SVG charts: forecast trend with quantile band, and SSE heat map.

Coordinates are written with a fixed two-decimal format so identical inputs
give byte-identical files.
"""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 420
MARGIN = {"left": 70, "right": 20, "top": 36, "bottom": 50}


def _f(v: float) -> str:
    return f"{v:.2f}"


def _nice_ticks(lo: float, hi: float, count: int = 6) -> list:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(1, count - 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + step * 1e-9:
        ticks.append(round(v, 12))
        v += step
    return ticks


def _label(v: float) -> str:
    return f"{v:.6g}"


class _Canvas:
    def __init__(self, title: str, width: int = WIDTH, height: int = HEIGHT):
        self.width, self.height = width, height
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
            f'<text x="{_f(width / 2)}" y="20" text-anchor="middle" font-size="14">'
            f'{escape(title)}</text>',
        ]

    def add(self, element: str) -> None:
        self.parts.append(element)

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


class _Axes:
    def __init__(self, canvas: _Canvas, xlim, ylim):
        self.c = canvas
        self.x0 = MARGIN["left"]
        self.x1 = canvas.width - MARGIN["right"]
        self.y0 = canvas.height - MARGIN["bottom"]
        self.y1 = MARGIN["top"]
        self.xlim, self.ylim = xlim, ylim

    def sx(self, v):
        lo, hi = self.xlim
        return self.x0 + (v - lo) / (hi - lo) * (self.x1 - self.x0) if hi > lo else self.x0

    def sy(self, v):
        lo, hi = self.ylim
        return self.y0 - (v - lo) / (hi - lo) * (self.y0 - self.y1) if hi > lo else self.y0

    def frame(self, xlabel: str, ylabel: str):
        c = self.c
        c.add(f'<rect x="{_f(self.x0)}" y="{_f(self.y1)}" width="{_f(self.x1 - self.x0)}" '
              f'height="{_f(self.y0 - self.y1)}" fill="none" stroke="black"/>')
        for t in _nice_ticks(*self.xlim):
            x = self.sx(t)
            c.add(f'<line x1="{_f(x)}" y1="{_f(self.y0)}" x2="{_f(x)}" y2="{_f(self.y0 + 5)}" '
                  f'stroke="black"/>')
            c.add(f'<text x="{_f(x)}" y="{_f(self.y0 + 18)}" text-anchor="middle">'
                  f'{_label(t)}</text>')
        for t in _nice_ticks(*self.ylim):
            y = self.sy(t)
            c.add(f'<line x1="{_f(self.x0 - 5)}" y1="{_f(y)}" x2="{_f(self.x0)}" y2="{_f(y)}" '
                  f'stroke="black"/>')
            c.add(f'<text x="{_f(self.x0 - 8)}" y="{_f(y + 4)}" text-anchor="end">'
                  f'{_label(t)}</text>')
        c.add(f'<text x="{_f((self.x0 + self.x1) / 2)}" y="{_f(c.height - 12)}" '
              f'text-anchor="middle">{escape(xlabel)}</text>')
        c.add(f'<text x="16" y="{_f((self.y0 + self.y1) / 2)}" text-anchor="middle" '
              f'transform="rotate(-90 16 {_f((self.y0 + self.y1) / 2)})">{escape(ylabel)}</text>')

    def points(self, xs, ys) -> str:
        return " ".join(f"{_f(self.sx(x))},{_f(self.sy(y))}" for x, y in zip(xs, ys))


def trend_chart(mean, lower, upper, truth=None, title: str = "Forecast trend",
                history=None) -> str:
    """Mean path (solid), quantile band (filled), optional truth (dashed).

    ``history`` values, when given, are drawn at non-positive steps.
    """
    mean = np.asarray(mean, dtype=np.float64)
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    steps = np.arange(1, mean.size + 1)
    series = [lower, upper, mean]
    if truth is not None:
        truth = np.asarray(truth, dtype=np.float64)[:mean.size]
        series.append(truth)
    hist_x = np.array([])
    if history is not None:
        history = np.asarray(history, dtype=np.float64)
        hist_x = np.arange(-history.size + 1, 1)
        series.append(history)
    values = np.concatenate(series)
    lo, hi = float(np.min(values)), float(np.max(values))
    pad = 0.05 * (hi - lo) if hi > lo else 1.0
    xmin = float(hist_x[0]) if hist_x.size else 1.0
    canvas = _Canvas(title)
    ax = _Axes(canvas, (xmin, float(max(steps[-1], xmin + 1))), (lo - pad, hi + pad))
    ax.frame("horizon step", "value")
    band = ax.points(steps, upper) + " " + ax.points(steps[::-1], lower[::-1])
    canvas.add(f'<polygon id="band" points="{band}" fill="#9ecae1" fill-opacity="0.5" '
               f'stroke="none"/>')
    if hist_x.size:
        canvas.add(f'<polyline id="history" points="{ax.points(hist_x, history)}" fill="none" '
                   f'stroke="#555555" stroke-width="1"/>')
    if truth is not None:
        canvas.add(f'<polyline id="truth" points="{ax.points(steps[:truth.size], truth)}" '
                   f'fill="none" stroke="black" stroke-width="1" stroke-dasharray="4,3"/>')
    canvas.add(f'<polyline id="mean" points="{ax.points(steps, mean)}" fill="none" '
               f'stroke="#08519c" stroke-width="1.5"/>')
    legend = [("#08519c", "ensemble mean"), ("#9ecae1", "quantile band")]
    if truth is not None:
        legend.append(("black", "true values"))
    for i, (color, text) in enumerate(legend):
        y = MARGIN["top"] + 14 + 16 * i
        x = ax.x1 - 150
        canvas.add(f'<rect x="{_f(x)}" y="{_f(y - 9)}" width="12" height="10" fill="{color}"/>')
        canvas.add(f'<text x="{_f(x + 18)}" y="{_f(y)}">{escape(text)}</text>')
    return canvas.render()


def _color(t: float) -> str:
    # light yellow (low) to dark red (high)
    t = min(1.0, max(0.0, t))
    r = int(round(255 - 90 * t))
    g = int(round(245 - 225 * t))
    b = int(round(200 - 180 * t))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap(n1_values, n2_values, surface, best=None, title: str = "Validation SSE") -> str:
    """SSE over the (n1, n2) grid; failed cells grey, best cell outlined."""
    surface = np.asarray(surface, dtype=np.float64)
    finite = surface[np.isfinite(surface)]
    lo = float(finite.min()) if finite.size else 0.0
    hi = float(finite.max()) if finite.size else 1.0
    canvas = _Canvas(title, WIDTH, WIDTH - 100)
    x0, x1 = MARGIN["left"], canvas.width - MARGIN["right"] - 90
    y0, y1 = canvas.height - MARGIN["bottom"], MARGIN["top"]
    cw = (x1 - x0) / len(n2_values)
    ch = (y0 - y1) / len(n1_values)
    for a, n1 in enumerate(n1_values):
        for b, n2 in enumerate(n2_values):
            v = surface[a, b]
            fill = _color((v - lo) / (hi - lo) if hi > lo else 0.0) if math.isfinite(v) else "#bbbbbb"
            x, y = x0 + b * cw, y0 - (a + 1) * ch
            canvas.add(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(cw)}" height="{_f(ch)}" '
                       f'fill="{fill}"><title>n1={n1} n2={n2} sse={v:.6g}</title></rect>')
    if best is not None:
        a, b = list(n1_values).index(best[0]), list(n2_values).index(best[1])
        x, y = x0 + b * cw, y0 - (a + 1) * ch
        canvas.add(f'<rect id="best" x="{_f(x)}" y="{_f(y)}" width="{_f(cw)}" height="{_f(ch)}" '
                   f'fill="none" stroke="#0000ff" stroke-width="3"/>')
        canvas.add(f'<text x="{_f(x0)}" y="{_f(y1 - 6)}">best: n1={best[0]} n2={best[1]}</text>')
    step1 = max(1, len(n1_values) // 10)
    step2 = max(1, len(n2_values) // 10)
    for a in range(0, len(n1_values), step1):
        canvas.add(f'<text x="{_f(x0 - 6)}" y="{_f(y0 - (a + 0.5) * ch + 4)}" '
                   f'text-anchor="end">{n1_values[a]}</text>')
    for b in range(0, len(n2_values), step2):
        canvas.add(f'<text x="{_f(x0 + (b + 0.5) * cw)}" y="{_f(y0 + 16)}" '
                   f'text-anchor="middle">{n2_values[b]}</text>')
    canvas.add(f'<text x="{_f((x0 + x1) / 2)}" y="{_f(canvas.height - 12)}" '
               f'text-anchor="middle">n2 (deformation prototypes)</text>')
    mid = (y0 + y1) / 2
    canvas.add(f'<text x="16" y="{_f(mid)}" text-anchor="middle" '
               f'transform="rotate(-90 16 {_f(mid)})">n1 (regressor prototypes)</text>')
    # colour scale
    sx = x1 + 30
    for i in range(20):
        t = i / 19
        y = y0 - (i + 1) * (y0 - y1) / 20
        canvas.add(f'<rect x="{_f(sx)}" y="{_f(y)}" width="16" height="{_f((y0 - y1) / 20)}" '
                   f'fill="{_color(t)}"/>')
    canvas.add(f'<text x="{_f(sx + 20)}" y="{_f(y0)}">{_label(lo)}</text>')
    canvas.add(f'<text x="{_f(sx + 20)}" y="{_f(y1 + 10)}">{_label(hi)}</text>')
    return canvas.render()
