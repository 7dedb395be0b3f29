"""Minimal SVG line charts: axes, polylines, legend, horizontal reference lines.

Output depends only on the arguments, so a chart can be rebuilt offline from
the CSV it was drawn from.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence
from xml.sax.saxutils import escape

PALETTE = ("#d62728", "#1f77b4", "#2ca02c", "#000000", "#ff7f0e", "#9467bd", "#8c564b",
           "#e377c2", "#7f7f7f")

WIDTH, HEIGHT = 720, 440
LEFT, RIGHT, TOP, BOTTOM = 80, 170, 40, 60


@dataclass
class Series:
    label: str
    xs: Sequence[float]
    ys: Sequence[float]
    color: str | None = None


@dataclass
class Chart:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    series: list[Series] = field(default_factory=list)
    hlines: list[tuple[str, float]] = field(default_factory=list)
    log_y: bool = False


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = next(s * mag for s in (1, 2, 2.5, 5, 10) if s * mag >= raw)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-9 * step:
        out.append(round(v, 12))
        v += step
    return out


def _fmt(v: float) -> str:
    if v != 0 and (abs(v) >= 1e5 or abs(v) < 1e-3):
        return f"{v:.2g}"
    return f"{v:g}"


def render(chart: Chart) -> str:
    def ty(y):
        return math.log10(y) if chart.log_y else y

    pts = [(float(x), ty(float(y))) for s in chart.series for x, y in zip(s.xs, s.ys)
           if math.isfinite(float(y)) and (not chart.log_y or y > 0)]
    refs = [ty(v) for _, v in chart.hlines if math.isfinite(v) and (not chart.log_y or v > 0)]
    xs = [p[0] for p in pts] or [0.0, 1.0]
    ys = [p[1] for p in pts] + refs or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pad = (y1 - y0) * 0.05 or 0.5
    y0, y1 = y0 - pad, y1 + pad
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return TOP + (1 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>']
    if chart.title:
        out.append(f'<text x="{LEFT + pw / 2:.1f}" y="22" text-anchor="middle" '
                   f'font-size="14">{escape(chart.title)}</text>')
    out.append(f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" '
               f'stroke="#444"/>')
    for v in _ticks(x0, x1):
        x = sx(v)
        out.append(f'<line x1="{x:.1f}" y1="{TOP + ph}" x2="{x:.1f}" y2="{TOP + ph + 5}" '
                   f'stroke="#444"/>')
        out.append(f'<text x="{x:.1f}" y="{TOP + ph + 18}" text-anchor="middle">'
                   f'{_fmt(v)}</text>')
    for v in _ticks(y0, y1):
        y = sy(v)
        label = f"1e{_fmt(v)}" if chart.log_y else _fmt(v)
        out.append(f'<line x1="{LEFT - 5}" y1="{y:.1f}" x2="{LEFT}" y2="{y:.1f}" stroke="#444"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y + 4:.1f}" text-anchor="end">{label}</text>')
    if chart.xlabel:
        out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">'
                   f'{escape(chart.xlabel)}</text>')
    if chart.ylabel:
        out.append(f'<text x="18" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 18 {TOP + ph / 2:.1f})">{escape(chart.ylabel)}</text>')
    for label, v in chart.hlines:
        if not math.isfinite(v) or (chart.log_y and v <= 0):
            continue
        y = sy(ty(v))
        out.append(f'<line x1="{LEFT}" y1="{y:.1f}" x2="{LEFT + pw}" y2="{y:.1f}" '
                   f'stroke="#000" stroke-dasharray="6 4"/>')
        out.append(f'<text x="{LEFT + pw - 4}" y="{y - 4:.1f}" text-anchor="end">'
                   f'{escape(label)}</text>')
    legend = []
    for k, s in enumerate(chart.series):
        color = s.color or PALETTE[k % len(PALETTE)]
        seg = [f"{sx(float(x)):.1f},{sy(ty(float(y))):.1f}" for x, y in zip(s.xs, s.ys)
               if math.isfinite(float(y)) and (not chart.log_y or y > 0)]
        if seg:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                       f'points="{" ".join(seg)}"/>')
        if s.label and s.label not in {lbl for lbl, _ in legend}:
            legend.append((s.label, color))
    for k, (label, color) in enumerate(legend):
        y = TOP + 10 + 18 * k
        x = LEFT + pw + 12
        out.append(f'<line x1="{x}" y1="{y}" x2="{x + 20}" y2="{y}" stroke="{color}" '
                   f'stroke-width="2"/>')
        out.append(f'<text x="{x + 26}" y="{y + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
