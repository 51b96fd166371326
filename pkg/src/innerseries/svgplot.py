"""Minimal deterministic SVG line plots (thin black vs thick gray overlays)."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

WIDTH, HEIGHT = 720, 360
MARGIN = 48

# alternating styles: thin black first, thick gray second, then dashed variants
_STYLES = [
    ("#000000", 1.0, "none"),
    ("#999999", 2.5, "none"),
    ("#000000", 1.0, "6,3"),
    ("#999999", 2.5, "6,3"),
]


@dataclass(frozen=True)
class PlotSeries:
    label: str
    times: np.ndarray
    values: np.ndarray  # 1-D


def _fmt(x: float) -> str:
    return f"{x:.3f}"


def plot_svg(series: list[PlotSeries], window: tuple[float, float], path) -> None:
    """Write a standalone SVG overlaying the given series over a time window.

    Output is byte-identical for identical input.
    """
    if not series:
        raise ValueError("no series to plot")
    t0, t1 = window
    if not t1 > t0:
        raise ValueError("empty window")
    clipped = []
    for s in series:
        sel = (s.times >= t0) & (s.times <= t1)
        if sel.sum() < 2:
            raise ValueError(f"window contains too few samples of series {s.label!r}")
        clipped.append((s.label, s.times[sel], np.asarray(s.values)[sel]))
    ymin = min(float(np.min(v)) for _, _, v in clipped)
    ymax = max(float(np.max(v)) for _, _, v in clipped)
    if ymax == ymin:
        ymax = ymin + 1.0

    def sx(t):
        return MARGIN + (t - t0) / (t1 - t0) * (WIDTH - 2 * MARGIN)

    def sy(y):
        return HEIGHT - MARGIN - (y - ymin) / (ymax - ymin) * (HEIGHT - 2 * MARGIN)

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>',
        # axes
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="#000000" stroke-width="1"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" '
        f'y2="{HEIGHT - MARGIN}" stroke="#000000" stroke-width="1"/>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 16}" font-size="10">{_fmt(t0)}</text>',
        f'<text x="{WIDTH - MARGIN - 24}" y="{HEIGHT - MARGIN + 16}" font-size="10">{_fmt(t1)}</text>',
        f'<text x="4" y="{HEIGHT - MARGIN}" font-size="10">{_fmt(ymin)}</text>',
        f'<text x="4" y="{MARGIN + 4}" font-size="10">{_fmt(ymax)}</text>',
    ]
    for i, (label, t, v) in enumerate(clipped):
        color, width, dash = _STYLES[i % len(_STYLES)]
        pts = " ".join(f"{_fmt(sx(tt))},{_fmt(sy(vv))}" for tt, vv in zip(t, v))
        dash_attr = "" if dash == "none" else f' stroke-dasharray="{dash}"'
        lines.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="{width}"'
            f"{dash_attr} points=\"{pts}\"/>"
        )
        lines.append(
            f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 14 * i + 10}" '
            f'font-size="10" fill="{color}">{label}</text>'
        )
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")
