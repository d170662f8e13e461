"""Minimal SVG line plots of trajectories.

Energy is drawn red, bath occupation green, coherent control blue. Axes
autoscale to the plotted data; margins are fixed.
"""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError
from .integrator import Trajectory

COLORS = {"E": "#d62728", "n": "#2ca02c", "u": "#1f77b4"}
DASHES = ("", "6,3", "2,3", "8,3,2,3", "1,5")
SVG_NS = "http://www.w3.org/2000/svg"


@dataclass(frozen=True)
class FigureStyle:
    title: str = ""
    series: tuple = ("E", "n", "u")
    width: int = 720
    height: int = 420
    max_points: int = 800


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        pad = max(abs(lo), 1.0) * 0.5
        lo, hi = lo - pad, hi + pad
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def emit_figure(trajectories: Sequence[Trajectory], style: FigureStyle = FigureStyle()) -> str:
    """Render trajectories into a standalone SVG document."""
    if not trajectories:
        raise InvalidInputError("no trajectories to plot")
    margin_l, margin_r, margin_t, margin_b = 64, 100, 36, 48
    w, h = style.width, style.height
    pw, ph = w - margin_l - margin_r, h - margin_t - margin_b

    t_lo = min(float(tr.times[0]) for tr in trajectories)
    t_hi = max(float(tr.times[-1]) for tr in trajectories)
    values = [getattr(tr, s) for tr in trajectories for s in style.series]
    y_lo = min(float(np.min(v)) for v in values)
    y_hi = max(float(np.max(v)) for v in values)
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5 * max(abs(y_lo), 1.0), y_hi + 0.5 * max(abs(y_hi), 1.0)
    if t_hi == t_lo:
        t_hi = t_lo + 1.0

    def sx(t):
        return margin_l + (t - t_lo) / (t_hi - t_lo) * pw

    def sy(y):
        return margin_t + (y_hi - y) / (y_hi - y_lo) * ph

    svg = ET.Element(
        "svg",
        xmlns=SVG_NS,
        version="1.1",
        width=str(w),
        height=str(h),
        viewBox=f"0 0 {w} {h}",
    )
    ET.SubElement(svg, "rect", x="0", y="0", width=str(w), height=str(h), fill="white")
    if style.title:
        title = ET.SubElement(svg, "text", x=str(w / 2), y="20", attrib={"text-anchor": "middle"})
        title.text = style.title
    axes = ET.SubElement(svg, "g", stroke="black", attrib={"stroke-width": "1"})
    ET.SubElement(axes, "line", x1=str(margin_l), y1=str(margin_t + ph), x2=str(margin_l + pw), y2=str(margin_t + ph))
    ET.SubElement(axes, "line", x1=str(margin_l), y1=str(margin_t), x2=str(margin_l), y2=str(margin_t + ph))

    labels = ET.SubElement(svg, "g", attrib={"font-size": "11", "font-family": "sans-serif"})
    for t in _nice_ticks(t_lo, t_hi):
        x = sx(t)
        ET.SubElement(axes, "line", x1=f"{x:.2f}", y1=str(margin_t + ph), x2=f"{x:.2f}", y2=str(margin_t + ph + 4))
        lab = ET.SubElement(labels, "text", x=f"{x:.2f}", y=str(margin_t + ph + 16), attrib={"text-anchor": "middle"})
        lab.text = f"{t:g}"
    for y in _nice_ticks(y_lo, y_hi):
        if not y_lo <= y <= y_hi:
            continue
        yy = sy(y)
        ET.SubElement(axes, "line", x1=str(margin_l - 4), y1=f"{yy:.2f}", x2=str(margin_l), y2=f"{yy:.2f}")
        lab = ET.SubElement(labels, "text", x=str(margin_l - 6), y=f"{yy + 4:.2f}", attrib={"text-anchor": "end"})
        lab.text = f"{y:g}"
    xlab = ET.SubElement(labels, "text", x=str(margin_l + pw / 2), y=str(h - 10), attrib={"text-anchor": "middle"})
    xlab.text = "t"

    lines = ET.SubElement(svg, "g", fill="none", attrib={"stroke-width": "1.5"})
    for i, tr in enumerate(trajectories):
        stride = max(1, math.ceil(len(tr) / style.max_points))
        idx = np.arange(0, len(tr), stride)
        if idx[-1] != len(tr) - 1:
            idx = np.append(idx, len(tr) - 1)
        for name in style.series:
            ys = getattr(tr, name)
            pts = " ".join(f"{sx(tr.times[j]):.2f},{sy(ys[j]):.2f}" for j in idx)
            attrib = {"stroke": COLORS.get(name, "black"), "points": pts, "class": f"series-{name}"}
            dash = DASHES[i % len(DASHES)]
            if dash:
                attrib["stroke-dasharray"] = dash
            ET.SubElement(lines, "polyline", attrib=attrib)

    legend = ET.SubElement(svg, "g", attrib={"font-size": "12", "font-family": "sans-serif"})
    for k, name in enumerate(style.series):
        y = margin_t + 14 + 18 * k
        x = margin_l + pw + 14
        ET.SubElement(legend, "line", x1=str(x), y1=str(y - 4), x2=str(x + 20), y2=str(y - 4), stroke=COLORS.get(name, "black"), attrib={"stroke-width": "2"})
        lab = ET.SubElement(legend, "text", x=str(x + 26), y=str(y))
        lab.text = f"{name}(t)"

    ET.indent(svg)
    return '<?xml version="1.0" encoding="UTF-8"?>\n' + ET.tostring(svg, encoding="unicode") + "\n"
