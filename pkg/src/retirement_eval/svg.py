"""Minimal self-contained SVG line charts (polylines, axes, ticks, legend)."""

from __future__ import annotations

import math
from html import escape
from typing import Dict, List, Optional, Sequence, Tuple

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf")


def _nice_ticks(lo: float, hi: float, target: int = 5) -> List[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return []
    if hi == lo:
        hi, lo = hi + 1.0, lo - 1.0
    raw = (hi - lo) / max(target, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step) * step
    ticks = []
    v = start
    while v <= hi + step * 1e-9:
        ticks.append(round(v, 12))
        v += step
    return ticks


def _label(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1000 or abs(v) < 1e-3:
        return f"{v:.3g}"
    return f"{v:.6g}"


def line_chart(
    series: Dict[str, Tuple[Sequence[float], Sequence[float]]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    width: int = 720,
    height: int = 420,
    band: Optional[Tuple[Sequence[float], Sequence[float], Sequence[float]]] = None,
    hline: Optional[float] = None,
    vline: Optional[float] = None,
) -> str:
    """Render named (x, y) series as an SVG document string.

    ``band`` is an optional (x, lower, upper) shaded interval drawn beneath
    the lines; ``hline``/``vline`` draw dashed reference lines.
    """
    left, right, top, bottom = 70, 20, 40, 55
    pw, ph = width - left - right, height - top - bottom
    xs = [float(x) for xy in series.values() for x in xy[0]]
    ys = [float(y) for xy in series.values() for y in xy[1]]
    if band is not None:
        ys += [float(v) for v in band[1]] + [float(v) for v in band[2]]
    if hline is not None:
        ys.append(hline)
    if not xs or not ys:
        raise ValueError("nothing to plot")
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    sx = lambda x: left + (float(x) - x0) / (x1 - x0) * pw
    sy = lambda y: top + (1 - (float(y) - y0) / (y1 - y0)) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>')
    for t in _nice_ticks(y0, y1):
        y = sy(t)
        out.append(f'<line x1="{left}" y1="{y:.2f}" x2="{left + pw}" y2="{y:.2f}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{left - 6}" y="{y + 4:.2f}" text-anchor="end">{escape(_label(t))}</text>')
    for t in _nice_ticks(x0, x1, 8):
        x = sx(t)
        out.append(f'<line x1="{x:.2f}" y1="{top + ph}" x2="{x:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{top + ph + 18}" text-anchor="middle">{escape(_label(t))}</text>')
    out.append(f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>')
    out.append(f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>')
    if xlabel:
        out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    if ylabel:
        out.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 16 {top + ph / 2:.1f})">{escape(ylabel)}</text>')
    if band is not None:
        bx, lo, hi = band
        pts = [f"{sx(x):.2f},{sy(v):.2f}" for x, v in zip(bx, hi)]
        pts += [f"{sx(x):.2f},{sy(v):.2f}" for x, v in reversed(list(zip(bx, lo)))]
        out.append(f'<polygon points="{" ".join(pts)}" fill="#1f77b4" fill-opacity="0.15" stroke="none"/>')
    if hline is not None and y0 <= hline <= y1:
        out.append(f'<line x1="{left}" y1="{sy(hline):.2f}" x2="{left + pw}" y2="{sy(hline):.2f}" '
                   'stroke="#555" stroke-dasharray="4 3"/>')
    if vline is not None and x0 <= vline <= x1:
        out.append(f'<line x1="{sx(vline):.2f}" y1="{top}" x2="{sx(vline):.2f}" y2="{top + ph}" '
                   'stroke="#555" stroke-dasharray="4 3"/>')
    for k, (name, (x, y)) in enumerate(series.items()):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(x, y))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.8">'
                   f'<title>{escape(name)}</title></polyline>')
        ly = top + 14 + 16 * k
        out.append(f'<line x1="{left + pw - 150}" y1="{ly}" x2="{left + pw - 130}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + pw - 124}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
