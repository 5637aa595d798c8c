"""Minimal deterministic SVG line charts.

Hand-built markup with fixed geometry, a fixed palette, and grey error
bars; identical inputs produce byte-identical files.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

PALETTE = (
    "#1f77b4", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22",
)
ERROR_BAR_COLOR = "#999999"

WIDTH, HEIGHT = 720, 420
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 220, 40, 50


@dataclass
class Series:
    label: str
    xs: list[float]
    ys: list[float]
    sds: list[float] = field(default_factory=list)  # 0 / missing = no bar


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_line_chart(
    series: list[Series],
    title: str,
    x_label: str,
    y_label: str,
    path: str | Path,
) -> None:
    if not series:
        raise ValueError("no series to plot")
    xs_all = [x for s in series for x in s.xs]
    lows, highs = [], []
    for s in series:
        sds = s.sds if s.sds else [0.0] * len(s.ys)
        lows.extend(y - sd for y, sd in zip(s.ys, sds))
        highs.extend(y + sd for y, sd in zip(s.ys, sds))
    x_min, x_max = min(xs_all), max(xs_all)
    y_min, y_max = min(lows), max(highs)
    if x_max == x_min:
        x_max = x_min + 1.0
    if y_max == y_min:
        y_min, y_max = y_min - 1.0, y_max + 1.0
    pad = 0.05 * (y_max - y_min)
    y_min -= pad
    y_max += pad

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(x: float) -> float:
        return MARGIN_LEFT + (x - x_min) / (x_max - x_min) * plot_w

    def sy(y: float) -> float:
        return MARGIN_TOP + plot_h - (y - y_min) / (y_max - y_min) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH // 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="16">{title}</text>',
    ]
    # axes
    x0, y0 = MARGIN_LEFT, MARGIN_TOP + plot_h
    parts.append(
        f'<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y0}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{x0}" y1="{y0}" x2="{MARGIN_LEFT + plot_w}" y2="{y0}" stroke="black"/>'
    )
    # ticks
    for k in range(5):
        y_val = y_min + k * (y_max - y_min) / 4
        y_px = sy(y_val)
        parts.append(
            f'<line x1="{x0 - 4}" y1="{_fmt(y_px)}" x2="{x0}" y2="{_fmt(y_px)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{x0 - 8}" y="{_fmt(y_px + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{y_val:.3g}</text>'
        )
    for x_val in sorted(set(xs_all)):
        x_px = sx(x_val)
        parts.append(
            f'<line x1="{_fmt(x_px)}" y1="{y0}" x2="{_fmt(x_px)}" y2="{y0 + 4}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_fmt(x_px)}" y="{y0 + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{x_val:g}</text>'
        )
    parts.append(
        f'<text x="{MARGIN_LEFT + plot_w // 2}" y="{HEIGHT - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13">{x_label}</text>'
    )
    parts.append(
        f'<text x="18" y="{MARGIN_TOP + plot_h // 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="13" '
        f'transform="rotate(-90 18 {MARGIN_TOP + plot_h // 2})">{y_label}</text>'
    )
    # error bars first so lines draw on top
    for s in series:
        sds = s.sds if s.sds else [0.0] * len(s.ys)
        for x, y, sd in zip(s.xs, s.ys, sds):
            if sd <= 0:
                continue
            x_px = sx(x)
            top, bottom = sy(y + sd), sy(y - sd)
            parts.append(
                f'<line x1="{_fmt(x_px)}" y1="{_fmt(top)}" x2="{_fmt(x_px)}" '
                f'y2="{_fmt(bottom)}" stroke="{ERROR_BAR_COLOR}" stroke-width="1.5"/>'
            )
            for y_px in (top, bottom):
                parts.append(
                    f'<line x1="{_fmt(x_px - 3)}" y1="{_fmt(y_px)}" x2="{_fmt(x_px + 3)}" '
                    f'y2="{_fmt(y_px)}" stroke="{ERROR_BAR_COLOR}" stroke-width="1.5"/>'
                )
    for idx, s in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        points = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(s.xs, s.ys))
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>'
        )
        for x, y in zip(s.xs, s.ys):
            parts.append(
                f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="2.5" fill="{color}"/>'
            )
        legend_y = MARGIN_TOP + 14 + 18 * idx
        legend_x = MARGIN_LEFT + plot_w + 14
        parts.append(
            f'<line x1="{legend_x}" y1="{legend_y - 4}" x2="{legend_x + 18}" '
            f'y2="{legend_y - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{legend_x + 24}" y="{legend_y}" font-family="sans-serif" '
            f'font-size="11">{s.label}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="utf-8")
