"""Static SVG line charts of recorded sweep quantities."""

from __future__ import annotations

from html import escape
from pathlib import Path

import numpy as np

from .sweep import MANIFEST_NAME, UsageError, read_csv, read_manifest

PLOTTABLE = ("E_b", "delta_E", "ergotropy")
AXIS_LABELS = {
    "E_b": "stored energy E_b (dimensionless)",
    "delta_E": "net charging energy ΔE_b (dimensionless)",
    "ergotropy": "ergotropy (dimensionless)",
}
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf")

WIDTH, HEIGHT = 720, 480
LEFT, RIGHT, TOP, BOTTOM = 80, 170, 30, 60


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10 ** np.floor(np.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = np.ceil(lo / step) * step
    ticks = []
    x = start
    while x <= hi + 1e-12 * step:
        ticks.append(float(round(x / step) * step))
        x += step
    return ticks


def _padded(lo: float, hi: float) -> tuple[float, float]:
    if not np.isfinite(lo) or not np.isfinite(hi):
        return 0.0, 1.0
    if hi - lo < 1e-12:
        pad = max(abs(lo) * 0.1, 0.5)
        return lo - pad, hi + pad
    return lo, hi


def _label(varied: str, value: str) -> str:
    return f"{varied} = {value}"


def render_svg(curves, quantity: str, title: str = "") -> str:
    """SVG text for ``curves``: a list of (label, t array, y array)."""
    all_t = np.concatenate([c[1] for c in curves]) if curves else np.zeros(1)
    all_y = np.concatenate([c[2] for c in curves]) if curves else np.zeros(1)
    all_y = all_y[np.isfinite(all_y)]
    x0, x1 = _padded(float(all_t.min()), float(all_t.max()))
    y0, y1 = _padded(float(all_y.min()) if all_y.size else 0.0, float(all_y.max()) if all_y.size else 1.0)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(t):
        return LEFT + (t - x0) / (x1 - x0) * pw

    def sy(y):
        return TOP + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    if title:
        out.append(f'<text x="{LEFT + pw / 2:.2f}" y="{TOP - 10}" text-anchor="middle">{escape(title)}</text>')
    for t in _nice_ticks(x0, x1):
        x = sx(t)
        out.append(f'<line x1="{x:.2f}" y1="{TOP + ph}" x2="{x:.2f}" y2="{TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{x:.2f}" y="{TOP + ph + 18}" text-anchor="middle">{t:g}</text>')
    for v in _nice_ticks(y0, y1):
        y = sy(v)
        out.append(f'<line x1="{LEFT - 5}" y1="{y:.2f}" x2="{LEFT}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{LEFT - 8}" y="{y + 4:.2f}" text-anchor="end">{v:g}</text>')
    out.append(
        f'<text x="{LEFT + pw / 2:.2f}" y="{HEIGHT - 15}" text-anchor="middle">time t (dimensionless)</text>'
    )
    out.append(
        f'<text x="20" y="{TOP + ph / 2:.2f}" text-anchor="middle" '
        f'transform="rotate(-90 20 {TOP + ph / 2:.2f})">{escape(AXIS_LABELS.get(quantity, quantity))}</text>'
    )
    for i, (label, t, y) in enumerate(curves):
        color = COLORS[i % len(COLORS)]
        ok = np.isfinite(y)
        pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(t[ok], y[ok]))
        out.append(f'<g class="curve" data-label="{escape(label)}">')
        if ok.sum() == 1:
            px, py = pts.split(",")
            out.append(f'<circle cx="{px}" cy="{py}" r="3" fill="{color}"/>')
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        out.append("</g>")
        ly = TOP + 15 + 18 * i
        lx = LEFT + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def load_curves(run_dir, quantity: str):
    """Curves for ``quantity`` from every successful run in ``run_dir``."""
    if quantity not in PLOTTABLE:
        raise UsageError(f"cannot plot {quantity!r}; choose one of {', '.join(PLOTTABLE)}")
    run_dir = Path(run_dir)
    info = read_manifest(run_dir / MANIFEST_NAME)
    varied = info["header"]["varied"]
    curves = []
    for run in info["runs"]:
        if run["status"] != "ok":
            continue
        data = read_csv(run_dir / run["file"])
        if quantity not in data:
            raise UsageError(f"{run['file']} has no column {quantity!r}")
        value = getattr(run["spec"], varied)
        curves.append((_label(varied, f"{value:.4g}"), data["t"], data[quantity]))
    return info, curves


def emit_plot(run_dir, quantity: str, out_file=None) -> Path:
    info, curves = load_curves(run_dir, quantity)
    out_file = Path(out_file) if out_file else Path(run_dir) / f"{quantity}.svg"
    title = f"{info['header'].get('label', '')}: {quantity} vs t"
    out_file.write_text(render_svg(curves, quantity, title))
    return out_file
