"""Generated datasets for sanity checks and demos."""
from __future__ import annotations

import os

import numpy as np

from .core import Scanpath
from .ingest import DatasetRecord, dump_dataset, save_saliency

BLOB_CENTERS = ((0.25, 0.30), (0.72, 0.25), (0.30, 0.75), (0.70, 0.70))
BLOB_COLORS = ((1.0, 0.1, 0.1), (0.1, 1.0, 0.1), (0.1, 0.2, 1.0), (1.0, 0.9, 0.1))


def gaussian_bump(h, w, cx, cy, sigma):
    ys = np.linspace(0.0, 1.0, h)[:, None]
    xs = np.linspace(0.0, 1.0, w)[None, :]
    return np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2 * sigma ** 2))


def blob_dataset(n=4, size=64, scanpath_len=8, sigma=0.08):
    """Colored blobs on gray; every observer fixates the blob center ``scanpath_len`` times."""
    records, images = [], {}
    for k in range(n):
        cx, cy = BLOB_CENTERS[k % len(BLOB_CENTERS)]
        color = np.array(BLOB_COLORS[k % len(BLOB_COLORS)])[:, None, None]
        bump = gaussian_bump(size, size, cx, cy, sigma)[None]
        images[f"blob{k}"] = 0.2 * (1 - bump) + color * bump
        sp = Scanpath.from_points([(cx, cy)] * scanpath_len, f"blob{k}", size, size)
        records.append(DatasetRecord(f"blob{k}", size, size, (sp,)))
    return records, images


def write_blob_dataset(directory, n=4, size=64, scanpath_len=8) -> str:
    """Write :func:`blob_dataset` as JSON Lines plus ``.npy`` images; returns the dataset path."""
    os.makedirs(directory, exist_ok=True)
    records, images = blob_dataset(n, size, scanpath_len)
    out = []
    for rec in records:
        img_path = os.path.join(directory, f"{rec.image_id}.npy")
        np.save(img_path, images[rec.image_id].transpose(1, 2, 0))
        out.append(DatasetRecord(rec.image_id, rec.image_width, rec.image_height,
                                 rec.scanpaths, image_path=img_path))
    path = os.path.join(directory, "blobs.jsonl")
    dump_dataset(out, path)
    return path


def sample_from_map(values, n, rng):
    """Draw ``n`` normalized points with probability proportional to ``values``."""
    h, w = values.shape
    p = values.ravel() / values.sum()
    cells = rng.choice(h * w, size=n, p=p)
    rows, cols = np.divmod(cells, w)
    return np.stack([cols / (w - 1), rows / (h - 1)], axis=1)


def peaked_saliency(h, w, rng, n_peaks=2, sigma=0.06, floor=0.01):
    """Sum of random Gaussian bumps kept away from the image center."""
    s = np.full((h, w), floor)
    for _ in range(n_peaks):
        while True:
            cx, cy = rng.uniform(0.1, 0.9, size=2)
            if max(abs(cx - 0.5), abs(cy - 0.5)) > 0.25:
                break
        s += rng.uniform(0.5, 1.0) * gaussian_bump(h, w, cx, cy, sigma)
    return s


def central_saliency(h, w, radius=0.47):
    """Binary disc at the center: salient inside ``radius``."""
    ys = np.linspace(0.0, 1.0, h)[:, None]
    xs = np.linspace(0.0, 1.0, w)[None, :]
    return np.where((xs - 0.5) ** 2 + (ys - 0.5) ** 2 <= radius ** 2, 1.0, 0.0)


def saliency_dataset(n_images=50, size=32, observers=3, scanpath_len=8, seed=0,
                     kind="peaked"):
    """Records whose ground-truth fixations are sampled from their saliency maps.

    Returns ``(records, saliency)`` with ``saliency`` keyed by image_id.
    """
    rng = np.random.default_rng(seed)
    records, maps = [], {}
    for k in range(n_images):
        image_id = f"{kind}{k:03d}"
        if kind == "central":
            s = central_saliency(size, size)
        else:
            s = peaked_saliency(size, size, rng)
        maps[image_id] = s
        paths = tuple(Scanpath.from_points(sample_from_map(s, scanpath_len, rng), image_id,
                                           size, size) for _ in range(observers))
        records.append(DatasetRecord(image_id, size, size, paths))
    return records, maps


def write_saliency_dataset(directory, **kwargs) -> str:
    os.makedirs(directory, exist_ok=True)
    records, maps = saliency_dataset(**kwargs)
    out = []
    for rec in records:
        path = os.path.join(directory, f"{rec.image_id}.txt")
        save_saliency(maps[rec.image_id], path)
        out.append(DatasetRecord(rec.image_id, rec.image_width, rec.image_height,
                                 rec.scanpaths, saliency_path=path))
    path = os.path.join(directory, "saliency.jsonl")
    dump_dataset(out, path)
    return path
