"""Hand-emitted SVG line charts (mean curves with shaded deviation bands).

The CSV files are the canonical artifacts; these charts exist so a run
directory is inspectable without any plotting stack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

WIDTH, HEIGHT = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 50

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class Series:
    x: list
    y: list
    label: str
    band_lo: list = None
    band_hi: list = None


def _finite(values):
    return [v for v in values if math.isfinite(v)]


def _ticks(lo: float, hi: float, count: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    return [lo + span * i / (count - 1) for i in range(count)]


def _fmt(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1000 or abs(v) < 0.01:
        return f"{v:.2g}"
    return f"{v:.3g}"


def line_chart(path, series, title: str = "", xlabel: str = "", ylabel: str = ""):
    xs, ys = [], []
    for s in series:
        xs.extend(_finite(s.x))
        ys.extend(_finite(s.y))
        if s.band_lo is not None:
            ys.extend(_finite(s.band_lo))
            ys.extend(_finite(s.band_hi))
    if not xs or not ys:
        xs, ys = [0.0, 1.0], [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    inner_w = WIDTH - MARGIN_L - MARGIN_R
    inner_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x):
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * inner_w

    def py(y):
        return MARGIN_T + (y_hi - y) / (y_hi - y_lo) * inner_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="15">{title}</text>',
    ]
    # axes and ticks
    parts.append(f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" '
                 f'y2="{HEIGHT - MARGIN_B}" stroke="black"/>')
    parts.append(f'<line x1="{MARGIN_L}" y1="{HEIGHT - MARGIN_B}" x2="{WIDTH - MARGIN_R}" '
                 f'y2="{HEIGHT - MARGIN_B}" stroke="black"/>')
    for tx in _ticks(x_lo, x_hi):
        parts.append(f'<line x1="{px(tx):.1f}" y1="{HEIGHT - MARGIN_B}" '
                     f'x2="{px(tx):.1f}" y2="{HEIGHT - MARGIN_B + 5}" stroke="black"/>')
        parts.append(f'<text x="{px(tx):.1f}" y="{HEIGHT - MARGIN_B + 18}" '
                     f'text-anchor="middle">{_fmt(tx)}</text>')
    for ty in _ticks(y_lo, y_hi):
        parts.append(f'<line x1="{MARGIN_L - 5}" y1="{py(ty):.1f}" '
                     f'x2="{MARGIN_L}" y2="{py(ty):.1f}" stroke="black"/>')
        parts.append(f'<text x="{MARGIN_L - 8}" y="{py(ty) + 4:.1f}" '
                     f'text-anchor="end">{_fmt(ty)}</text>')
    parts.append(f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle">{xlabel}</text>')
    parts.append(f'<text x="18" y="{HEIGHT / 2}" text-anchor="middle" '
                 f'transform="rotate(-90 18 {HEIGHT / 2})">{ylabel}</text>')

    for idx, s in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        pairs = [(x, y) for x, y in zip(s.x, s.y) if math.isfinite(x) and math.isfinite(y)]
        if s.band_lo is not None:
            band = [(x, lo, hi) for x, lo, hi in zip(s.x, s.band_lo, s.band_hi)
                    if math.isfinite(lo) and math.isfinite(hi)]
            if band:
                upper = " ".join(f"{px(x):.1f},{py(hi):.1f}" for x, _, hi in band)
                lower = " ".join(f"{px(x):.1f},{py(lo):.1f}" for x, lo, _ in reversed(band))
                parts.append(f'<polygon points="{upper} {lower}" fill="{color}" '
                             f'fill-opacity="0.15" stroke="none"/>')
        if pairs:
            pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in pairs)
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                         f'stroke-width="1.6"/>')
        ly = MARGIN_T + 16 * idx
        parts.append(f'<line x1="{WIDTH - MARGIN_R - 150}" y1="{ly}" '
                     f'x2="{WIDTH - MARGIN_R - 125}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{WIDTH - MARGIN_R - 118}" y="{ly + 4}">{s.label}</text>')

    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
