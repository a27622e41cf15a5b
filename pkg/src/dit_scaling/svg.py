"""Minimal static SVG 1.1 charts with a CSV of the plotted numbers alongside.

Only what the reports need: scatter and line series, linear or log axes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 440
MARGIN = (70, 20, 40, 55)  # left, right, top, bottom
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass
class Series:
    label: str
    x: Sequence[float]
    y: Sequence[float]
    kind: str = "scatter"  # or "line"


def _fmt(v: float) -> str:
    return format(float(v), ".10g")


def _transform(values, log: bool):
    v = np.asarray(values, dtype=float)
    if log:
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(v > 0, np.log10(v), np.nan)
    return v


def _range(values: np.ndarray):
    finite = values[np.isfinite(values)]
    if finite.size == 0:
        return 0.0, 1.0
    lo, hi = float(finite.min()), float(finite.max())
    if hi - lo < 1e-12 * max(1.0, abs(hi)):
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _ticks(lo: float, hi: float, log: bool):
    if log:
        start, stop = math.ceil(lo), math.floor(hi)
        if stop >= start:
            return [(float(k), f"1e{k}") for k in range(start, stop + 1)]
    return [(float(t), format(10**t if log else t, ".3g")) for t in np.linspace(lo, hi, 5)]


def render_svg(series: Sequence[Series], title: str = "", xlabel: str = "", ylabel: str = "",
               logx: bool = False, logy: bool = False) -> str:
    left, right, top, bottom = MARGIN
    pw, ph = WIDTH - left - right, HEIGHT - top - bottom
    xs = [_transform(s.x, logx) for s in series]
    ys = [_transform(s.y, logy) for s in series]
    x0, x1 = _range(np.concatenate(xs) if xs else np.array([]))
    y0, y1 = _range(np.concatenate(ys) if ys else np.array([]))

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + ph - (v - y0) / (y1 - y0) * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for t, label in _ticks(x0, x1, logx):
        out.append(f'<line x1="{px(t):.2f}" y1="{top + ph}" x2="{px(t):.2f}" y2="{top + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{px(t):.2f}" y="{top + ph + 16}" text-anchor="middle">{escape(label)}</text>')
    for t, label in _ticks(y0, y1, logy):
        out.append(f'<line x1="{left - 4}" y1="{py(t):.2f}" x2="{left}" y2="{py(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{py(t) + 4:.2f}" text-anchor="end">{escape(label)}</text>')
    if title:
        out.append(f'<text x="{WIDTH / 2:.1f}" y="{top - 10}" text-anchor="middle" font-size="13">{escape(title)}</text>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2:.1f}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(
            f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
            f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>'
        )
    for k, (s, x, y) in enumerate(zip(series, xs, ys)):
        color = PALETTE[k % len(PALETTE)]
        ok = np.isfinite(x) & np.isfinite(y)
        pts = [(px(a), py(b)) for a, b in zip(x[ok], y[ok])]
        if s.kind == "line" and len(pts) > 1:
            path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        else:
            out.extend(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="3" fill="{color}"/>' for a, b in pts)
        ly = top + 14 + 14 * k
        out.append(f'<rect x="{left + pw - 150}" y="{ly - 8}" width="10" height="10" fill="{color}"/>')
        out.append(f'<text x="{left + pw - 135}" y="{ly + 1}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write_plot(path, series: Sequence[Series], **kwargs) -> tuple[Path, Path]:
    """Write ``path`` (SVG) and the same stem with ``.csv`` holding every plotted point."""
    path = Path(path)
    path.write_text(render_svg(series, **kwargs))
    csv_path = path.with_suffix(".csv")
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["series", "kind", "x", "y"])
        for s in series:
            for a, b in zip(s.x, s.y):
                w.writerow([s.label, s.kind, _fmt(a), _fmt(b)])
    return path, csv_path
