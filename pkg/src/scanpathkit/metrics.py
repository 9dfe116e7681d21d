"""Scanpath evaluation metrics: NSS, Otsu congruency and MultiMatch.

MultiMatch here skips the simplification stage of the original toolbox.
Saccades are aligned directly by a minimum-cost monotone path over the
saccade-pair lattice, and every component is normalized to ``[0, 1]``
using the geometry of the unit image square.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import FixationMap, SaliencyMap, SaccadeVector, Scanpath, grid_cells, saccade_vectors

SQRT2 = math.sqrt(2.0)


class DegenerateMapError(ValueError):
    pass


@dataclass(frozen=True)
class MultiMatchResult:
    shape: float
    direction: float
    length: float
    position: float
    duration: Optional[float]
    score: float


@dataclass(frozen=True)
class Alignment:
    pairs: tuple[tuple[int, int], ...]
    cost: float


def _as_array(s) -> np.ndarray:
    return s.values if isinstance(s, SaliencyMap) else np.asarray(s, dtype=np.float64)


def normalize_saliency(s) -> np.ndarray:
    """Z-score a saliency map using the population standard deviation."""
    v = _as_array(s)
    if v.size == 0:
        raise ValueError("empty saliency map")
    if np.ptp(v) == 0:
        raise DegenerateMapError("degenerate saliency map")
    sigma = v.std()
    if sigma == 0:
        raise DegenerateMapError("degenerate saliency map")
    return (v - v.mean()) / sigma


def nss(s, fixmap: FixationMap) -> float:
    v = _as_array(s)
    cells = fixmap.cells if isinstance(fixmap, FixationMap) else np.asarray(fixmap)
    if v.shape != cells.shape:
        raise ValueError(f"shape mismatch: saliency {v.shape} vs fixation map {cells.shape}")
    n = int(cells.sum())
    if n == 0:
        raise ValueError("fixation map has no fixations")
    p = normalize_saliency(v)
    return float(p[cells.astype(bool)].sum() / n)


def otsu_threshold(s, bins: int = 256) -> float:
    """Otsu threshold over an equal-width histogram on ``[min, max]``.

    Candidates are the interior bin edges. A value is salient when it is
    strictly greater than the returned threshold; bin membership uses the
    same strict comparison so the histogram partition and the final
    binarization always agree. Class moments come from the exact per-bin
    sums of the input values, and ties go to the lowest edge.
    """
    v = _as_array(s).ravel()
    if v.size == 0:
        raise ValueError("empty saliency map")
    if bins < 1:
        raise ValueError("bins must be positive")
    lo, hi = float(v.min()), float(v.max())
    if lo == hi or bins == 1:
        return lo
    edges = np.linspace(lo, hi, bins + 1)
    idx = np.searchsorted(edges[1:-1], v, side="left")
    counts = np.bincount(idx, minlength=bins).astype(np.float64)
    sums = np.bincount(idx, weights=v, minlength=bins)

    n = float(v.size)
    total = sums.sum()
    best_k, best_var = None, -1.0
    c0 = s0 = 0.0
    for k in range(1, bins):
        c0 += counts[k - 1]
        s0 += sums[k - 1]
        c1 = n - c0
        if c0 == 0 or c1 == 0:
            continue
        var = between_class_variance(c0, s0, c1, total - s0, n)
        if var > best_var:
            best_k, best_var = k, var
    if best_k is None:
        return lo
    return float(edges[best_k])


def between_class_variance(c0, s0, c1, s1, n):
    return (c0 / n) * (c1 / n) * (s1 / c1 - s0 / c0) ** 2


def salient_mask(s, bins: int = 256) -> np.ndarray:
    v = _as_array(s)
    return v > otsu_threshold(v, bins)


def congruency(s, scanpath: Scanpath, bins: int = 256) -> float:
    """Fraction of fixations (duplicates counted) landing on Otsu-salient cells."""
    if len(scanpath.fixations) == 0:
        raise ValueError("empty scanpath")
    v = _as_array(s)
    mask = salient_mask(v, bins)
    rows, cols = grid_cells(scanpath.xy, v.shape[1], v.shape[0])
    return float(mask[rows, cols].sum() / len(rows))


# --------------------------------------------------------------------------
# MultiMatch

_STEPS = ((1, 1), (1, 0), (0, 1))


def align(a: Sequence[SaccadeVector], b: Sequence[SaccadeVector]) -> Alignment:
    """Minimum-cost monotone alignment of two saccade sequences.

    Node cost is the Euclidean distance between the paired vectors. Costs
    to go are computed by dynamic programming over the lattice (a DAG, so
    this is the same optimum a uniform-cost search finds); the path is then
    walked forward from ``(0, 0)`` preferring diagonal, then ``A``-only,
    then ``B``-only steps among optimal continuations.
    """
    ua = np.asarray(a, dtype=np.float64).reshape(-1, 2)
    vb = np.asarray(b, dtype=np.float64).reshape(-1, 2)
    if len(ua) == 0 or len(vb) == 0:
        raise ValueError("cannot align an empty saccade sequence")
    n, m = len(ua), len(vb)
    node = np.sqrt(((ua[:, None, :] - vb[None, :, :]) ** 2).sum(axis=2))

    togo = np.full((n + 1, m + 1), np.inf)
    togo[n - 1, m - 1] = node[n - 1, m - 1]
    for i in range(n - 1, -1, -1):
        for j in range(m - 1, -1, -1):
            if i == n - 1 and j == m - 1:
                continue
            togo[i, j] = node[i, j] + min(togo[i + 1, j + 1], togo[i + 1, j], togo[i, j + 1])

    pairs = [(0, 0)]
    i = j = 0
    while (i, j) != (n - 1, m - 1):
        best = min(togo[i + di, j + dj] for di, dj in _STEPS)
        for di, dj in _STEPS:
            if togo[i + di, j + dj] == best:
                i, j = i + di, j + dj
                break
        pairs.append((i, j))
    cost = 0.0
    for i, j in pairs:
        cost += node[i, j]
    return Alignment(tuple(pairs), cost)


def _angle_between(u, v) -> float:
    if (u[0] == 0 and u[1] == 0) or (v[0] == 0 and v[1] == 0):
        return 0.0
    cross = u[0] * v[1] - u[1] * v[0]
    dot = u[0] * v[0] + u[1] * v[1]
    return abs(math.atan2(cross, dot))


def multimatch(a: Scanpath, b: Scanpath) -> MultiMatchResult:
    if len(a) < 2 or len(b) < 2:
        raise ValueError("multimatch needs at least 2 fixations per scanpath")
    sa, sb = saccade_vectors(a), saccade_vectors(b)
    alignment = align(sa, sb)
    xa, xb = a.xy, b.xy
    da, db = a.durations, b.durations

    shape = direction = length = position = duration = 0.0
    for i, j in alignment.pairs:
        u, v = sa[i], sb[j]
        shape += math.hypot(u[0] - v[0], u[1] - v[1]) / (2 * SQRT2)
        direction += _angle_between(u, v) / math.pi
        length += abs(math.hypot(*u) - math.hypot(*v)) / SQRT2
        # saccade k ends on fixation k + 1
        ea, eb = xa[i + 1], xb[j + 1]
        position += math.hypot(ea[0] - eb[0], ea[1] - eb[1]) / SQRT2
        if da is not None and db is not None:
            # saccade k starts when fixation k ends
            du, dv = da[i], db[j]
            peak = max(du, dv)
            duration += abs(du - dv) / peak if peak > 0 else 0.0

    k = len(alignment.pairs)
    shape, direction, length, position = (1 - shape / k, 1 - direction / k,
                                          1 - length / k, 1 - position / k)
    dur_sim = 1 - duration / k if da is not None and db is not None else None
    score = (shape + direction + length + position) / 4
    return MultiMatchResult(shape, direction, length, position, dur_sim, score)
