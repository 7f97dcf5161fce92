"""Standalone SVG line charts (median line with a 25-75% band), no timestamps embedded."""
from __future__ import annotations

from dataclasses import dataclass
from html import escape
from pathlib import Path
from typing import List, Optional, Sequence, Union

WIDTH, HEIGHT = 720, 420
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 70, 160, 40, 50
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")


@dataclass
class Series:
    label: str
    xs: Sequence[float]
    ys: Sequence[float]
    lower: Optional[Sequence[float]] = None
    upper: Optional[Sequence[float]] = None


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _bounds(series: List[Series]) -> tuple[float, float, float, float]:
    xs = [x for s in series for x in s.xs]
    ys = [y for s in series for band in (s.ys, s.lower or [], s.upper or []) for y in band]
    if not xs:
        return 0.0, 1.0, 0.0, 1.0
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    return x0, x1, y0 - pad, y1 + pad


def line_chart_svg(series: Sequence[Series], title: str, x_label: str = "step", y_label: str = "") -> str:
    series = [s for s in series if len(s.xs)]
    x0, x1, y0, y1 = _bounds(series)
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def px(x: float) -> float:
        return MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w

    def py(y: float) -> float:
        return MARGIN_TOP + (1.0 - (y - y0) / (y1 - y0)) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.0f}" y="24" text-anchor="middle" font-family="sans-serif" font-size="16">{escape(title)}</text>',
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_w}" height="{plot_h}" fill="none" stroke="#444"/>',
    ]
    for i in range(5):
        fx = x0 + (x1 - x0) * i / 4
        fy = y0 + (y1 - y0) * i / 4
        out.append(
            f'<text x="{_fmt(px(fx))}" y="{HEIGHT - MARGIN_BOTTOM + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{fx:g}</text>'
        )
        out.append(
            f'<text x="{MARGIN_LEFT - 6}" y="{_fmt(py(fy) + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{fy:.3g}</text>'
        )
    out.append(
        f'<text x="{MARGIN_LEFT + plot_w / 2:.0f}" y="{HEIGHT - 10}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{escape(x_label)}</text>'
    )
    if y_label:
        out.append(
            f'<text x="16" y="{MARGIN_TOP + plot_h / 2:.0f}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="12" transform="rotate(-90 16 {MARGIN_TOP + plot_h / 2:.0f})">{escape(y_label)}</text>'
        )

    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        if s.lower is not None and s.upper is not None:
            upper = [f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(s.xs, s.upper)]
            lower = [f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(reversed(s.xs), reversed(s.lower))]
            out.append(f'<polygon points="{" ".join(upper + lower)}" fill="{color}" fill-opacity="0.2" stroke="none"/>')
        points = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(s.xs, s.ys))
        out.append(f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="2"/>')
        legend_y = MARGIN_TOP + 14 + 18 * i
        out.append(
            f'<line x1="{WIDTH - MARGIN_RIGHT + 12}" y1="{legend_y - 4}" x2="{WIDTH - MARGIN_RIGHT + 32}" '
            f'y2="{legend_y - 4}" stroke="{color}" stroke-width="2"/>'
        )
        out.append(
            f'<text x="{WIDTH - MARGIN_RIGHT + 38}" y="{legend_y}" font-family="sans-serif" '
            f'font-size="11">{escape(s.label)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_svg(path: Union[str, Path], series: Sequence[Series], title: str, x_label: str = "step", y_label: str = "") -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(line_chart_svg(series, title, x_label, y_label), encoding="utf-8", newline="\n")
    return path
