"""Minimal self-contained SVG renderers for diagnostics output.

Line charts and heatmaps as plain SVG strings, no plotting dependency.
Meant for quick inspection of pipeline artifacts, not publication.
"""

from __future__ import annotations

import numpy as np

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def line_chart(
    x: np.ndarray,
    series: list[tuple[str, np.ndarray]],
    title: str,
    width: int = 640,
    height: int = 360,
) -> str:
    """Polyline chart of one or more named series over a shared x axis."""
    x = np.asarray(x, dtype=float)
    margin = 50
    plot_w = width - 2 * margin
    plot_h = height - 2 * margin
    ys = np.concatenate([np.asarray(y, dtype=float) for _, y in series])
    y_lo, y_hi = float(np.min(ys)), float(np.max(ys))
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    x_lo, x_hi = float(x.min()), float(x.max())
    if x_hi == x_lo:
        x_hi = x_lo + 1.0

    def sx(v: float) -> float:
        return margin + (v - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v: float) -> float:
        return height - margin - (v - y_lo) / (y_hi - y_lo) * plot_h

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="20" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
    ]
    for frac in (0.0, 0.5, 1.0):
        xv = x_lo + frac * (x_hi - x_lo)
        yv = y_lo + frac * (y_hi - y_lo)
        parts.append(
            f'<text x="{sx(xv):.1f}" y="{height - margin + 18}" text-anchor="middle" '
            f'font-size="11">{_fmt(xv)}</text>'
        )
        parts.append(
            f'<text x="{margin - 6}" y="{sy(yv):.1f}" text-anchor="end" '
            f'font-size="11">{_fmt(yv)}</text>'
        )
    for i, (label, y) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{sx(xi):.1f},{sy(yi):.1f}" for xi, yi in zip(x, np.asarray(y, float)))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        parts.append(
            f'<text x="{width - margin}" y="{margin + 14 * (i + 1)}" text-anchor="end" '
            f'font-size="11" fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def _diverging_color(v: float) -> str:
    # -1 -> blue, 0 -> white, +1 -> red
    v = max(-1.0, min(1.0, v))
    if v >= 0:
        g = b = int(round(255 * (1 - v)))
        return f"rgb(255,{g},{b})"
    r = g = int(round(255 * (1 + v)))
    return f"rgb({r},{g},255)"


def heatmap(matrix: np.ndarray, title: str, cell: int = 4, max_dim: int = 160) -> str:
    """Diverging heatmap of a matrix with entries in [-1, 1].

    Large matrices are strided down to at most max_dim per side.
    """
    mat = np.asarray(matrix, dtype=float)
    step_r = max(1, -(-mat.shape[0] // max_dim))
    step_c = max(1, -(-mat.shape[1] // max_dim))
    mat = mat[::step_r, ::step_c]
    rows, cols = mat.shape
    margin = 30
    width = cols * cell + 2 * margin
    height = rows * cell + 2 * margin
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{title}</text>',
    ]
    for i in range(rows):
        for j in range(cols):
            parts.append(
                f'<rect x="{margin + j * cell}" y="{margin + i * cell}" width="{cell}" '
                f'height="{cell}" fill="{_diverging_color(mat[i, j])}"/>'
            )
    parts.append("</svg>")
    return "\n".join(parts)


def write_svg(content: str, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(content)
