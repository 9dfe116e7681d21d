"""File-emitting plots: scanpath overlays as SVG and fixation density grids."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .core import Scanpath

DEFAULT_PALETTE = ("#e6194b", "#3cb44b", "#4363d8", "#f58231", "#911eb4", "#46f0f0",
                   "#f032e6", "#bcf60c")


@dataclass(frozen=True)
class RenderSpec:
    stroke_width: float = 2.0
    point_radius: float = 9.0
    palette: tuple = DEFAULT_PALETTE
    width: int = 640  # output width in px; height follows the image aspect ratio

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("output size must be positive")
        if self.stroke_width <= 0 or self.point_radius <= 0 or not self.palette:
            raise ValueError("stroke width, point radius and palette must be non-empty")


def render_svg(scanpaths: Sequence[Scanpath], image_width: int, image_height: int,
               spec: RenderSpec = RenderSpec(), background: Optional[str] = None,
               title: str = "") -> str:
    """Overlay scanpaths with numbered fixations and arrowed saccades.

    Arrows stop at the rim of the target circle so the numbers stay legible.
    """
    W = spec.width
    H = max(1, round(W * image_height / image_width))
    r = spec.point_radius
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" xmlns:xlink="http://www.w3.org/1999/xlink" '
        f'width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
    ]
    if title:
        out.append(f"<title>{escape(title)}</title>")
    out.append("<defs>")
    for k, color in enumerate(spec.palette):
        out.append(f'<marker id="arrow{k}" viewBox="0 0 10 10" refX="9" refY="5" '
                   f'markerWidth="6" markerHeight="6" orient="auto-start-reverse">'
                   f'<path d="M 0 0 L 10 5 L 0 10 z" fill="{color}"/></marker>')
    out.append("</defs>")
    if background:
        out.append(f'<image x="0" y="0" width="{W}" height="{H}" '
                   f'preserveAspectRatio="none" xlink:href={quoteattr(background)}/>')
    else:
        out.append(f'<rect x="0" y="0" width="{W}" height="{H}" fill="#f4f4f4" stroke="#999"/>')

    for s_idx, sp in enumerate(scanpaths):
        k = s_idx % len(spec.palette)
        color = spec.palette[k]
        pts = [(f.x * (W - 1), f.y * (H - 1)) for f in sp.fixations]
        out.append(f'<g class="scanpath" data-index="{s_idx}">')
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            d = math.hypot(x1 - x0, y1 - y0)
            if d > 2 * r:
                ux, uy = (x1 - x0) / d, (y1 - y0) / d
                x0, y0, x1, y1 = x0 + ux * r, y0 + uy * r, x1 - ux * r, y1 - uy * r
            out.append(f'<line class="saccade" x1="{x0:.2f}" y1="{y0:.2f}" x2="{x1:.2f}" '
                       f'y2="{y1:.2f}" stroke="{color}" stroke-width="{spec.stroke_width}" '
                       f'marker-end="url(#arrow{k})"/>')
        for n, (x, y) in enumerate(pts, start=1):
            out.append(f'<circle class="fixation" cx="{x:.2f}" cy="{y:.2f}" r="{r}" '
                       f'fill="{color}" fill-opacity="0.75" stroke="#000" stroke-width="1"/>')
            out.append(f'<text class="label" x="{x:.2f}" y="{y:.2f}" font-size="{r * 1.2:.1f}" '
                       f'text-anchor="middle" dominant-baseline="central" '
                       f'font-family="sans-serif" fill="#fff">{n}</text>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def density_grid(xy: np.ndarray, bins: int) -> np.ndarray:
    """``bins x bins`` histogram of normalized points, rows = y, summing to 1."""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    if len(xy) == 0:
        raise ValueError("no fixations")
    if bins < 1:
        raise ValueError("bins must be positive")
    cols = np.minimum((xy[:, 0] * bins).astype(int), bins - 1)
    rows = np.minimum((xy[:, 1] * bins).astype(int), bins - 1)
    grid = np.zeros((bins, bins))
    np.add.at(grid, (rows, cols), 1.0)
    return grid / len(xy)
