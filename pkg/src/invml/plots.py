"""Minimal SVG 1.1 writer for scatter and line plots."""
from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT, MARGIN = 480, 400, 40

# tab10-like palette; labels beyond ten wrap around
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
           "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _scale(v, lo, hi, a, b):
    span = hi - lo
    if span <= 0:
        return np.full_like(v, (a + b) / 2.0, dtype=np.float64)
    return a + (v - lo) * (b - a) / span


def _frame(title: str) -> list:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{WIDTH - 2 * MARGIN}" height="{HEIGHT - 2 * MARGIN}" '
        'fill="none" stroke="#444" stroke-width="1"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2 + 5}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{escape(title)}</text>',
    ]


def _axis_labels(lines, xlo, xhi, ylo, yhi):
    style = 'font-family="sans-serif" font-size="10" fill="#444"'
    lines.append(f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 14}" {style}>{xlo:.3g}</text>')
    lines.append(f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 14}" text-anchor="end" {style}>{xhi:.3g}</text>')
    lines.append(f'<text x="{MARGIN - 4}" y="{HEIGHT - MARGIN}" text-anchor="end" {style}>{ylo:.3g}</text>')
    lines.append(f'<text x="{MARGIN - 4}" y="{MARGIN + 8}" text-anchor="end" {style}>{yhi:.3g}</text>')


def scatter_svg(path, points, labels=None, title: str = "", radius: float = 2.0) -> None:
    """2-D scatter; points coloured by integer label when given."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError(f"scatter needs n x 2 points, got {pts.shape}")
    xlo, ylo = pts.min(axis=0) if len(pts) else (0.0, 0.0)
    xhi, yhi = pts.max(axis=0) if len(pts) else (1.0, 1.0)
    px = _scale(pts[:, 0], xlo, xhi, MARGIN + 5, WIDTH - MARGIN - 5)
    py = _scale(pts[:, 1], ylo, yhi, HEIGHT - MARGIN - 5, MARGIN + 5)
    lines = _frame(title)
    _axis_labels(lines, xlo, xhi, ylo, yhi)
    if labels is None:
        colours = [PALETTE[0]] * len(pts)
    else:
        _, codes = np.unique(np.asarray(labels), return_inverse=True)
        colours = [PALETTE[c % len(PALETTE)] for c in codes]
    for x, y, c in zip(px, py, colours):
        lines.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{radius}" fill="{c}" fill-opacity="0.8"/>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")


def line_svg(path, x, series: dict, title: str = "", log_y: bool = False) -> None:
    """One polyline per named series over a shared x grid."""
    xv = np.asarray(x, dtype=np.float64)
    ys = {name: np.asarray(v, dtype=np.float64) for name, v in series.items()}
    if log_y:
        # symmetric log so negative push terms still plot
        ys = {name: np.sign(v) * np.log10(1.0 + np.abs(v)) for name, v in ys.items()}
    finite = [v[np.isfinite(v)] for v in ys.values()]
    allv = np.concatenate(finite) if finite else np.zeros(1)
    allv = allv if allv.size else np.zeros(1)
    xlo, xhi = (float(xv.min()), float(xv.max())) if xv.size else (0.0, 1.0)
    ylo, yhi = float(allv.min()), float(allv.max())
    lines = _frame(title)
    _axis_labels(lines, xlo, xhi, ylo, yhi)
    px = _scale(xv, xlo, xhi, MARGIN, WIDTH - MARGIN)
    for n, (name, v) in enumerate(ys.items()):
        colour = PALETTE[n % len(PALETTE)]
        py = _scale(v, ylo, yhi, HEIGHT - MARGIN, MARGIN)
        pts = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(px, py) if np.isfinite(b))
        lines.append(f'<polyline points="{pts}" fill="none" stroke="{colour}" stroke-width="1.5"/>')
        lines.append(f'<text x="{WIDTH - MARGIN + 4}" y="{MARGIN + 12 * (n + 1)}" font-family="sans-serif" '
                     f'font-size="10" fill="{colour}">{escape(str(name))}</text>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n")


def embedding_points(z) -> np.ndarray:
    """First two coordinates, or a 2-D PCA projection when ``z`` is wider."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[1] == 2:
        return z
    if z.shape[1] == 1:
        return np.column_stack([z[:, 0], np.zeros(len(z))])
    from .linalg import pca_project
    return pca_project(z, 2)
