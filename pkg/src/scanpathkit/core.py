"""Domain types and geometric primitives for scanpaths and saliency maps.

Coordinates are always stored normalized: ``x`` is a fraction of the image
width and ``y`` a fraction of the image height, both in ``[0, 1]``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np


@dataclass(frozen=True)
class Fixation:
    x: float
    y: float
    t: Optional[float] = None
    dur: Optional[float] = None

    def __post_init__(self):
        for name in ("x", "y"):
            v = getattr(self, name)
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"fixation {name}={v!r} outside [0, 1]")
        for name in ("t", "dur"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v >= 0):
                raise ValueError(f"fixation {name}={v!r} must be a non-negative real")


@dataclass(frozen=True)
class Scanpath:
    fixations: tuple[Fixation, ...]
    image_id: str = ""
    image_width: int = 1
    image_height: int = 1

    def __post_init__(self):
        object.__setattr__(self, "fixations", tuple(self.fixations))
        if not self.fixations:
            raise ValueError("empty scanpath")
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dimensions must be positive")
        for prev, cur in zip(self.fixations, self.fixations[1:]):
            timed = (prev.t, prev.dur, cur.t, cur.dur)
            if all(v is not None for v in timed) and cur.t < prev.t:
                raise ValueError("fixation timestamps must be non-decreasing")

    def __len__(self):
        return len(self.fixations)

    @classmethod
    def from_points(cls, points, image_id="", image_width=1, image_height=1,
                    durations=None) -> "Scanpath":
        """Build a scanpath from an iterable of normalized ``(x, y)`` pairs."""
        pts = [(float(x), float(y)) for x, y in points]
        if durations is None:
            durations = [None] * len(pts)
        fix = tuple(Fixation(x, y, dur=d) for (x, y), d in zip(pts, durations))
        return cls(fix, image_id, image_width, image_height)

    @property
    def xy(self) -> np.ndarray:
        """``(n, 2)`` float array of normalized coordinates."""
        return np.array([(f.x, f.y) for f in self.fixations], dtype=np.float64)

    @property
    def durations(self) -> Optional[np.ndarray]:
        """Per-fixation durations, or None unless every fixation carries one."""
        if any(f.dur is None for f in self.fixations):
            return None
        return np.array([f.dur for f in self.fixations], dtype=np.float64)


@dataclass(frozen=True, eq=False)
class SaliencyMap:
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        if v.ndim != 2 or v.size == 0:
            raise ValueError("saliency map must be a non-empty 2-D grid")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("saliency values must be finite and non-negative")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


@dataclass(frozen=True, eq=False)
class FixationMap:
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.asarray(self.cells)
        if c.ndim != 2 or not np.isin(c, (0, 1)).all():
            raise ValueError("fixation map must be a binary 2-D grid")
        c = c.astype(np.uint8)
        c.setflags(write=False)
        object.__setattr__(self, "cells", c)

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def count(self) -> int:
        return int(self.cells.sum())


class SaccadeVector(NamedTuple):
    dx: float
    dy: float


def round_half_away(v):
    """Round to nearest, ties away from zero (``np.round`` rounds ties to even)."""
    v = np.asarray(v, dtype=np.float64)
    return (np.sign(v) * np.floor(np.abs(v) + 0.5)).astype(np.int64)


def grid_cells(xy: np.ndarray, grid_w: int, grid_h: int) -> tuple[np.ndarray, np.ndarray]:
    """Map normalized points to ``(rows, cols)`` on a ``grid_h x grid_w`` lattice."""
    xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
    cols = round_half_away(xy[:, 0] * (grid_w - 1))
    rows = round_half_away(xy[:, 1] * (grid_h - 1))
    return rows, cols


def rasterize(scanpath: Scanpath, grid_w: int, grid_h: int) -> FixationMap:
    if len(scanpath.fixations) == 0:
        raise ValueError("empty scanpath")
    if grid_w < 1 or grid_h < 1:
        raise ValueError("grid dimensions must be >= 1")
    cells = np.zeros((grid_h, grid_w), dtype=np.uint8)
    rows, cols = grid_cells(scanpath.xy, grid_w, grid_h)
    cells[rows, cols] = 1
    return FixationMap(cells)


def saccade_vectors(scanpath: Scanpath) -> list[SaccadeVector]:
    if len(scanpath.fixations) < 2:
        raise ValueError("no saccades")
    f = scanpath.fixations
    return [SaccadeVector(b.x - a.x, b.y - a.y) for a, b in zip(f, f[1:])]
