"""Minimal SVG scatter plots of dots and atoms."""

from __future__ import annotations

import numpy as np

SIZE = 400
MARGIN = 20


def gray_level(density: float) -> int:
    """Monochrome ramp with 256 steps: density 0 -> 255 (white), 1 -> 0 (black)."""
    d = min(max(float(density), 0.0), 1.0)
    return 255 - int(np.floor(d * 255 + 0.5))


def _frame(points: np.ndarray, extent):
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    w, h = extent
    scale = (SIZE - 2 * MARGIN) / max(w, h)
    return MARGIN + pts * scale, scale


def scatter_svg(points, extent=(1.0, 1.0), densities=None, radius: float = 5.0,
                title: str = "") -> str:
    """One <circle> per point. With `densities`, fill follows `gray_level`."""
    xy, _ = _frame(points, extent)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" '
        f'viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect width="{SIZE}" height="{SIZE}" fill="#f4f4f4"/>',
    ]
    if title:
        lines.append(f'<title>{title}</title>')
    for i, (x, y) in enumerate(xy):
        if densities is None:
            fill = "#000000"
        else:
            g = gray_level(densities[i])
            fill = f"#{g:02x}{g:02x}{g:02x}"
        lines.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{radius:g}" fill="{fill}" '
                     f'stroke="#000000" stroke-width="1"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_svg(path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
