"""Reference scanpath generators: center-bias sampling and winner-takes-all."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SaliencyMap, Scanpath

CENTER_STD = 0.15


@dataclass(frozen=True)
class WtaConfig:
    n_fixations: int = 8
    ior_radius: float = 0.1

    def __post_init__(self):
        if self.n_fixations < 1:
            raise ValueError("n_fixations must be positive")
        if not 0 < self.ior_radius < 1:
            raise ValueError("ior_radius must lie in (0, 1)")


def center_bias(n: int, seed: int, image_id: str = "", width: int = 1, height: int = 1,
                std: float = CENTER_STD) -> Scanpath:
    """``n`` i.i.d. Gaussian draws around the image center, rejected outside [0, 1]^2."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed % 2**64)
    pts = []
    while len(pts) < n:
        x, y = rng.normal(0.5, std, size=2)
        if 0.0 <= x <= 1.0 and 0.0 <= y <= 1.0:
            pts.append((x, y))
    return Scanpath.from_points(pts, image_id, width, height)


def cell_center(row: int, col: int, h: int, w: int) -> tuple[float, float]:
    """Normalized ``(x, y)`` of a grid cell, the inverse of rasterization."""
    return (col / (w - 1) if w > 1 else 0.0, row / (h - 1) if h > 1 else 0.0)


def wta_scanpath(s, cfg: WtaConfig = WtaConfig(), image_id: str = "", width: int = 1,
                 height: int = 1) -> Scanpath:
    """Winner-takes-all with hard inhibition of return.

    Repeatedly take the global maximum (first in raster order on ties) and
    suppress every cell whose center lies within ``ior_radius`` of it.
    """
    v = (s.values if isinstance(s, SaliencyMap) else np.asarray(s, dtype=np.float64)).copy()
    if v.size == 0 or np.ptp(v) == 0:
        raise ValueError("constant saliency map")
    h, w = v.shape
    xs = np.arange(w) / (w - 1) if w > 1 else np.zeros(1)
    ys = np.arange(h) / (h - 1) if h > 1 else np.zeros(1)
    pts = []
    for _ in range(cfg.n_fixations):
        flat = int(np.argmax(v))
        if v.flat[flat] == -np.inf:
            break
        r, c = divmod(flat, w)
        x, y = cell_center(r, c, h, w)
        pts.append((x, y))
        dx, dy = xs[None, :] - x, ys[:, None] - y
        near = dx * dx + dy * dy <= cfg.ior_radius * cfg.ior_radius
        v[near] = -np.inf
    return Scanpath.from_points(pts, image_id, width, height)
