"""Static SVG charts: boxplots, line charts and density curves.

Standalone SVG on a fixed 800x500 canvas with deterministic element
ordering, so identical inputs produce identical bytes. No timestamps or
external resources are embedded.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

from .exceptions import EmptySeries

WIDTH = 800
HEIGHT = 500
MARGIN_LEFT = 70
MARGIN_RIGHT = 160
MARGIN_TOP = 40
MARGIN_BOTTOM = 60

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _check_series(series):
    if not series:
        raise EmptySeries("no data series supplied")
    for label, values in series:
        if len(np.atleast_1d(values)) == 0:
            raise EmptySeries(f"series {label!r} is empty")


def _ticks(lo, hi, count=5):
    if hi <= lo:
        hi = lo + 1.0
    raw = np.linspace(lo, hi, count)
    return raw


def _y_scale(lo, hi):
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad
    span = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def to_px(v):
        return MARGIN_TOP + span * (hi - v) / (hi - lo)

    return lo, hi, to_px


def _open_svg(title):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    if title:
        parts.append(
            f'<text x="{WIDTH / 2:.2f}" y="24" text-anchor="middle" '
            f'font-family="monospace" font-size="16">{escape(title)}</text>'
        )
    return parts


def _axes(parts, y_lo, y_hi, to_py, ylabel):
    x0 = MARGIN_LEFT
    x1 = WIDTH - MARGIN_RIGHT
    y1 = HEIGHT - MARGIN_BOTTOM
    parts.append(f'<line x1="{x0}" y1="{MARGIN_TOP}" x2="{x0}" y2="{y1}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}" stroke="black"/>')
    for tick in _ticks(y_lo, y_hi):
        py = to_py(tick)
        parts.append(f'<line x1="{x0 - 4}" y1="{py:.2f}" x2="{x0}" y2="{py:.2f}" stroke="black"/>')
        parts.append(
            f'<text x="{x0 - 8}" y="{py + 4:.2f}" text-anchor="end" '
            f'font-family="monospace" font-size="11">{tick:.4g}</text>'
        )
    if ylabel:
        parts.append(
            f'<text x="16" y="{(MARGIN_TOP + y1) / 2:.2f}" text-anchor="middle" '
            f'font-family="monospace" font-size="12" '
            f'transform="rotate(-90 16 {(MARGIN_TOP + y1) / 2:.2f})">{escape(ylabel)}</text>'
        )


def _legend(parts, labels):
    x = WIDTH - MARGIN_RIGHT + 14
    y = MARGIN_TOP + 8
    for i, label in enumerate(labels):
        color = PALETTE[i % len(PALETTE)]
        parts.append(f'<rect x="{x}" y="{y + 18 * i - 8}" width="10" height="10" fill="{color}"/>')
        parts.append(
            f'<text x="{x + 16}" y="{y + 18 * i}" font-family="monospace" '
            f'font-size="12">{escape(str(label))}</text>'
        )


def emit_svg_boxplot(series, path, title="", ylabel="") -> None:
    """One box per (label, values) pair, whiskers at 1.5 x IQR, outliers as dots."""
    _check_series(series)
    data = [(str(label), np.sort(np.asarray(values, dtype=float))) for label, values in series]
    all_vals = np.concatenate([v for _, v in data])
    y_lo, y_hi, to_py = _y_scale(float(all_vals.min()), float(all_vals.max()))
    parts = _open_svg(title)
    _axes(parts, y_lo, y_hi, to_py, ylabel)

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    slot = plot_w / len(data)
    box_w = min(60.0, slot * 0.5)
    y_base = HEIGHT - MARGIN_BOTTOM
    for i, (label, values) in enumerate(data):
        color = PALETTE[i % len(PALETTE)]
        cx = MARGIN_LEFT + slot * (i + 0.5)
        q1, med, q3 = np.percentile(values, [25.0, 50.0, 75.0])
        iqr = q3 - q1
        lo_fence = q1 - 1.5 * iqr
        hi_fence = q3 + 1.5 * iqr
        inside = values[(values >= lo_fence) & (values <= hi_fence)]
        whisk_lo = float(inside.min()) if inside.size else float(q1)
        whisk_hi = float(inside.max()) if inside.size else float(q3)
        x_l = cx - box_w / 2
        x_r = cx + box_w / 2
        parts.append(
            f'<rect x="{x_l:.2f}" y="{to_py(q3):.2f}" width="{box_w:.2f}" '
            f'height="{max(to_py(q1) - to_py(q3), 0.0):.2f}" fill="{color}" '
            f'fill-opacity="0.35" stroke="{color}"/>'
        )
        parts.append(
            f'<line x1="{x_l:.2f}" y1="{to_py(med):.2f}" x2="{x_r:.2f}" '
            f'y2="{to_py(med):.2f}" stroke="{color}" stroke-width="2"/>'
        )
        for w_val, q_val in ((whisk_lo, q1), (whisk_hi, q3)):
            parts.append(
                f'<line x1="{cx:.2f}" y1="{to_py(q_val):.2f}" x2="{cx:.2f}" '
                f'y2="{to_py(w_val):.2f}" stroke="{color}"/>'
            )
            parts.append(
                f'<line x1="{cx - box_w / 4:.2f}" y1="{to_py(w_val):.2f}" '
                f'x2="{cx + box_w / 4:.2f}" y2="{to_py(w_val):.2f}" stroke="{color}"/>'
            )
        for v in values[(values < lo_fence) | (values > hi_fence)]:
            parts.append(
                f'<circle cx="{cx:.2f}" cy="{to_py(v):.2f}" r="2.5" fill="none" '
                f'stroke="{color}"/>'
            )
        parts.append(
            f'<text x="{cx:.2f}" y="{y_base + 18:.2f}" text-anchor="middle" '
            f'font-family="monospace" font-size="11">{escape(label)}</text>'
        )
    _legend(parts, [label for label, _ in data])
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def emit_svg_lines(x_values, series, path, title="", xlabel="", ylabel="") -> None:
    """One polyline per (label, y_values) pair over the shared ``x_values``."""
    _check_series(series)
    xs = np.asarray(x_values, dtype=float)
    if xs.size == 0:
        raise EmptySeries("x_values is empty")
    for label, ys in series:
        if len(ys) != xs.size:
            raise ValueError(f"series {label!r} length does not match x_values")
    all_y = np.concatenate([np.asarray(ys, dtype=float) for _, ys in series])
    y_lo, y_hi, to_py = _y_scale(float(all_y.min()), float(all_y.max()))
    x_lo, x_hi = float(xs.min()), float(xs.max())
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT

    def to_px(v):
        return MARGIN_LEFT + plot_w * (v - x_lo) / (x_hi - x_lo)

    parts = _open_svg(title)
    _axes(parts, y_lo, y_hi, to_py, ylabel)
    y_base = HEIGHT - MARGIN_BOTTOM
    for tick in _ticks(x_lo, x_hi):
        px = to_px(tick)
        parts.append(f'<line x1="{px:.2f}" y1="{y_base}" x2="{px:.2f}" y2="{y_base + 4}" stroke="black"/>')
        parts.append(
            f'<text x="{px:.2f}" y="{y_base + 18}" text-anchor="middle" '
            f'font-family="monospace" font-size="11">{tick:.4g}</text>'
        )
    if xlabel:
        parts.append(
            f'<text x="{(MARGIN_LEFT + WIDTH - MARGIN_RIGHT) / 2:.2f}" y="{HEIGHT - 16}" '
            f'text-anchor="middle" font-family="monospace" font-size="12">{escape(xlabel)}</text>'
        )
    for i, (label, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{to_px(x):.2f},{to_py(float(y)):.2f}" for x, y in zip(xs, ys))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
    _legend(parts, [label for label, _ in series])
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def kde_curve(values, points: int = 200):
    """Gaussian kernel density curve with Silverman bandwidth; returns (xs, density)."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise EmptySeries("cannot build a density from no data")
    sd = values.std(ddof=1) if values.size > 1 else 0.0
    iqr = float(np.subtract(*np.percentile(values, [75.0, 25.0])))
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    if spread <= 0:
        spread = max(abs(values[0]), 1.0) * 0.01
    bw = 0.9 * spread * values.size ** (-0.2)
    xs = np.linspace(values.min() - 3 * bw, values.max() + 3 * bw, points)
    z = (xs[:, None] - values[None, :]) / bw
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (values.size * bw * np.sqrt(2 * np.pi))
    return xs, dens


def emit_svg_density(series, path, title="", xlabel="", ylabel="density") -> None:
    """Overlaid kernel density curves, one per (label, values) pair."""
    _check_series(series)
    curves = [(label, *kde_curve(values)) for label, values in series]
    x_lo = min(float(xs.min()) for _, xs, _ in curves)
    x_hi = max(float(xs.max()) for _, xs, _ in curves)
    grid = np.linspace(x_lo, x_hi, 200)
    resampled = []
    for label, xs, dens in curves:
        resampled.append((label, np.interp(grid, xs, dens, left=0.0, right=0.0)))
    emit_svg_lines(grid, resampled, path, title=title, xlabel=xlabel, ylabel=ylabel)
