"""Minimal deterministic SVG line/scatter plots.

Static result displays only: fixed canvas, 1-2-5 tick selection, a small
fixed color palette, and stable float formatting, so identical data
always produces byte-identical files.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
           "#8c564b", "#17becf", "#7f7f7f")


def _fmt(v: float) -> str:
    """Stable short decimal for pixel coordinates."""
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _fmt_tick(v: float) -> str:
    return f"{v:.6g}"


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    """Round tick positions covering [lo, hi] with a 1/2/5 step."""
    if not math.isfinite(lo) or not math.isfinite(hi):
        return []
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(target, 1)
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * mag
        if raw <= step:
            break
    first = math.ceil(lo / step - 1e-9)
    last = math.floor(hi / step + 1e-9)
    return [t * step for t in range(first, last + 1)]


@dataclass
class Series:
    """One polyline or point set."""

    x: list
    y: list
    label: str = ""
    color: str | None = None
    marker: bool = False       # scatter dots instead of a line
    dash: str | None = None    # e.g. "4,3"


@dataclass
class Figure:
    """A single-axes figure; add series, then render to SVG text."""

    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    width: int = 640
    height: int = 420
    series: list = field(default_factory=list)
    x_range: tuple | None = None
    y_range: tuple | None = None

    def add(self, x, y, label: str = "", color: str | None = None,
            marker: bool = False, dash: str | None = None) -> None:
        xs = [float(v) for v in x]
        ys = [float(v) for v in y]
        if len(xs) != len(ys):
            raise ValueError("x and y lengths differ")
        self.series.append(Series(xs, ys, label, color, marker, dash))

    def _limits(self) -> tuple[float, float, float, float]:
        if self.x_range is not None:
            x_lo, x_hi = self.x_range
        else:
            xs = [v for s in self.series for v in s.x if math.isfinite(v)]
            x_lo, x_hi = (min(xs), max(xs)) if xs else (0.0, 1.0)
        if self.y_range is not None:
            y_lo, y_hi = self.y_range
        else:
            ys = [v for s in self.series for v in s.y if math.isfinite(v)]
            y_lo, y_hi = (min(ys), max(ys)) if ys else (0.0, 1.0)
        if x_hi <= x_lo:
            x_lo, x_hi = x_lo - 0.5, x_lo + 0.5
        if y_hi <= y_lo:
            y_lo, y_hi = y_lo - 0.5, y_lo + 0.5
        pad = 0.04 * (y_hi - y_lo)
        return x_lo, x_hi, y_lo - pad, y_hi + pad

    def to_svg(self) -> str:
        left, right, top, bottom = 62, 16, 34, 46
        pw = self.width - left - right
        ph = self.height - top - bottom
        x_lo, x_hi, y_lo, y_hi = self._limits()

        def px(v):
            return left + (v - x_lo) / (x_hi - x_lo) * pw

        def py(v):
            return top + (y_hi - v) / (y_hi - y_lo) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" '
            f'width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">',
            f'<rect width="{self.width}" height="{self.height}" '
            f'fill="white"/>',
            f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" '
            f'fill="none" stroke="#404040" stroke-width="1"/>',
        ]
        for t in nice_ticks(x_lo, x_hi):
            if not x_lo <= t <= x_hi:
                continue
            x = _fmt(px(t))
            out.append(f'<line x1="{x}" y1="{top + ph}" x2="{x}" '
                       f'y2="{top + ph + 4}" stroke="#404040"/>')
            out.append(f'<text x="{x}" y="{top + ph + 17}" font-size="11" '
                       f'text-anchor="middle" fill="#202020" '
                       f'font-family="sans-serif">{_fmt_tick(t)}</text>')
        for t in nice_ticks(y_lo, y_hi):
            if not y_lo <= t <= y_hi:
                continue
            y = _fmt(py(t))
            out.append(f'<line x1="{left - 4}" y1="{y}" x2="{left}" '
                       f'y2="{y}" stroke="#404040"/>')
            out.append(f'<text x="{left - 7}" y="{y}" font-size="11" '
                       f'text-anchor="end" dominant-baseline="middle" '
                       f'fill="#202020" font-family="sans-serif">'
                       f'{_fmt_tick(t)}</text>')
        if self.title:
            out.append(f'<text x="{self.width / 2:.0f}" y="20" '
                       f'font-size="14" text-anchor="middle" fill="#000" '
                       f'font-family="sans-serif">{self.title}</text>')
        if self.xlabel:
            out.append(f'<text x="{left + pw / 2:.0f}" '
                       f'y="{self.height - 10}" font-size="12" '
                       f'text-anchor="middle" fill="#000" '
                       f'font-family="sans-serif">{self.xlabel}</text>')
        if self.ylabel:
            out.append(f'<text x="14" y="{top + ph / 2:.0f}" font-size="12" '
                       f'text-anchor="middle" fill="#000" '
                       f'font-family="sans-serif" transform="rotate(-90 14 '
                       f'{top + ph / 2:.0f})">{self.ylabel}</text>')

        clip = (f'<clipPath id="plot"><rect x="{left}" y="{top}" '
                f'width="{pw}" height="{ph}"/></clipPath>')
        out.append(f"<defs>{clip}</defs>")
        for i, s in enumerate(self.series):
            color = s.color or PALETTE[i % len(PALETTE)]
            if s.marker:
                dots = [f'<circle cx="{_fmt(px(x))}" cy="{_fmt(py(y))}" '
                        f'r="2.2" fill="{color}" fill-opacity="0.75"/>'
                        for x, y in zip(s.x, s.y)
                        if math.isfinite(x) and math.isfinite(y)]
                out.append(f'<g clip-path="url(#plot)">{"".join(dots)}</g>')
            else:
                pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}"
                               for x, y in zip(s.x, s.y)
                               if math.isfinite(x) and math.isfinite(y))
                dash = f' stroke-dasharray="{s.dash}"' if s.dash else ""
                out.append(f'<g clip-path="url(#plot)"><polyline '
                           f'points="{pts}" fill="none" stroke="{color}" '
                           f'stroke-width="1.5"{dash}/></g>')
        # legend
        labeled = [(i, s) for i, s in enumerate(self.series) if s.label]
        for row, (i, s) in enumerate(labeled):
            color = s.color or PALETTE[i % len(PALETTE)]
            y = top + 12 + 16 * row
            out.append(f'<rect x="{left + pw - 150}" y="{y - 8}" width="18" '
                       f'height="8" fill="{color}"/>')
            out.append(f'<text x="{left + pw - 127}" y="{y}" font-size="11" '
                       f'fill="#202020" font-family="sans-serif">'
                       f'{s.label}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def save(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_svg())
