"""Self-contained SVG convergence plots: log10(gap) against effective passes.

No plotting dependency: the file is assembled by hand so results remain
inspectable and diffable anywhere.  Gaps at or below zero are clamped to
1e-16 before taking logs.
"""

from __future__ import annotations

import math
from pathlib import Path

GAP_CLAMP = 1e-16

PALETTE = ("#1b6ca8", "#d1495b", "#66a182", "#edae49", "#7d5ba6", "#2e4057", "#9a8c98")

WIDTH, HEIGHT = 760, 480
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 160, 28, 48


class TraceSeries:
    """One polyline: (passes, gap) pairs plus a legend label."""

    def __init__(self, label: str, passes, gaps):
        if len(passes) == 0 or len(passes) != len(gaps):
            raise ValueError("a trace needs matching, nonempty passes and gaps")
        self.label = label
        self.passes = [float(p) for p in passes]
        self.log_gaps = [math.log10(max(float(g), GAP_CLAMP)) for g in gaps]


def series_from_csv(path: str | Path, label: str | None = None) -> TraceSeries:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        try:
            pi, gi = header.index("passes"), header.index("gap")
        except ValueError as exc:
            raise ValueError(f"{path}: trace CSV needs 'passes' and 'gap' columns") from exc
        passes, gaps = [], []
        for line in fh:
            cells = line.strip().split(",")
            if len(cells) <= max(pi, gi):
                continue
            p, g = float(cells[pi]), float(cells[gi])
            if not math.isnan(g):
                passes.append(p)
                gaps.append(g)
    name = label or path.stem.removeprefix("trace_")
    return TraceSeries(name, passes, gaps)


def _ticks(lo: float, hi: float, count: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s for s in (mag, 2 * mag, 5 * mag, 10 * mag) if s >= raw)
    first = math.ceil(lo / step) * step
    out = []
    t = first
    while t <= hi + 1e-9 * step:
        out.append(round(t, 10))
        t += step
    return out


def emit_plot(series: list[TraceSeries], out_path: str | Path, title: str = "") -> Path:
    """Write one SVG with one polyline per series and a legend in run order."""
    if not series:
        raise ValueError("need at least one trace to plot")
    x_lo = min(min(s.passes) for s in series)
    x_hi = max(max(s.passes) for s in series)
    y_lo = min(min(s.log_gaps) for s in series)
    y_hi = max(max(s.log_gaps) for s in series)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pw = WIDTH - MARGIN_L - MARGIN_R
    ph = HEIGHT - MARGIN_T - MARGIN_B

    def X(p):
        return MARGIN_L + (p - x_lo) / (x_hi - x_lo) * pw

    def Y(g):
        return MARGIN_T + (y_hi - g) / (y_hi - y_lo) * ph

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="monospace" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" '
        'fill="none" stroke="#333" stroke-width="1"/>',
    ]
    if title:
        parts.append(f'<text x="{MARGIN_L}" y="{MARGIN_T - 10}" font-size="14">{title}</text>')
    for t in _ticks(x_lo, x_hi):
        x = X(t)
        parts.append(f'<line x1="{x:.1f}" y1="{MARGIN_T + ph}" x2="{x:.1f}" y2="{MARGIN_T + ph + 5}" stroke="#333"/>')
        parts.append(f'<text x="{x:.1f}" y="{MARGIN_T + ph + 20}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y_lo, y_hi):
        y = Y(t)
        parts.append(f'<line x1="{MARGIN_L - 5}" y1="{y:.1f}" x2="{MARGIN_L}" y2="{y:.1f}" stroke="#333"/>')
        parts.append(f'<text x="{MARGIN_L - 9}" y="{y + 4:.1f}" text-anchor="end">{t:g}</text>')
    parts.append(
        f'<text x="{MARGIN_L + pw / 2:.0f}" y="{HEIGHT - 10}" text-anchor="middle">effective passes</text>'
    )
    parts.append(
        f'<text x="16" y="{MARGIN_T + ph / 2:.0f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {MARGIN_T + ph / 2:.0f})">log10 objective gap</text>'
    )
    for idx, s in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        pts = " ".join(f"{X(p):.2f},{Y(g):.2f}" for p, g in zip(s.passes, s.log_gaps))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.6"/>')
        ly = MARGIN_T + 16 + 18 * idx
        lx = MARGIN_L + pw + 12
        parts.append(f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 28}" y="{ly}">{s.label}</text>')
    parts.append("</svg>")
    out_path = Path(out_path)
    out_path.write_text("\n".join(parts) + "\n")
    return out_path
