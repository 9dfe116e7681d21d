"""Dataset loading, saliency/image file formats, and length statistics.

Canonical dataset format is JSON Lines, one record per line::

    {"image_id": "COCO_0001", "width": 640, "height": 480,
     "scanpaths": [[[x, y, t?, dur?], ...], ...],
     "saliency": "maps/COCO_0001.pgm", "image": "img/COCO_0001.png",
     "split": "train"}

``saliency``, ``image`` and ``split`` are optional.  Relative file
references are resolved against the dataset file's directory.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
import statistics
from collections import Counter
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import Fixation, SaliencyMap, Scanpath

COORDINATE_MODES = ("normalized", "pixel_origin0", "pixel_origin1")


class DatasetError(ValueError):
    """Malformed or out-of-bounds dataset content."""

    def __init__(self, message, line=None, image_id=None):
        self.line = line
        self.image_id = image_id
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


@dataclass(frozen=True)
class DatasetRecord:
    image_id: str
    image_width: int
    image_height: int
    scanpaths: tuple[Scanpath, ...]
    saliency_path: Optional[str] = None
    image_path: Optional[str] = None
    split: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "scanpaths", tuple(self.scanpaths))
        if not self.scanpaths:
            raise ValueError(f"record {self.image_id!r} has no scanpaths")
        for sp in self.scanpaths:
            if (sp.image_width, sp.image_height) != (self.image_width, self.image_height):
                raise ValueError(f"record {self.image_id!r}: scanpath dimensions differ")


@dataclass(frozen=True)
class StatsSummary:
    min: int
    max: int
    mean: float
    median: int
    std: float
    mode: int
    mode_share: float
    count: int

    def as_dict(self) -> dict:
        return asdict(self)

    def table_row(self) -> str:
        header = ("Min", "Max", "Mean", "Median", "std", "Mode", "Nbr. scanpaths")
        values = (str(self.min), str(self.max), f"{self.mean:.2f}", str(self.median),
                  f"{self.std:.2f}", f"{self.mode} ({100 * self.mode_share:.2f} %)",
                  str(self.count))
        widths = [max(len(h), len(v)) for h, v in zip(header, values)]
        lines = ["Measure  " + "  ".join(h.rjust(w) for h, w in zip(header, widths)),
                 "Value    " + "  ".join(v.rjust(w) for v, w in zip(values, widths))]
        return "\n".join(lines)


# --------------------------------------------------------------------------
# dataset JSON Lines

def _normalize(v, size, mode, axis, image_id, line):
    if mode == "normalized":
        lo, hi = 0.0, 1.0
    elif mode == "pixel_origin0":
        lo, hi = 0.0, size - 1.0
    else:
        lo, hi = 1.0, float(size)
    if not (lo <= v <= hi):
        raise DatasetError(f"{axis}={v!r} outside image bounds [{lo:g}, {hi:g}] "
                           f"for image_id {image_id!r}", line, image_id)
    if mode == "normalized":
        return v
    return 0.0 if size == 1 else (v - lo) / (size - 1)


def _parse_fixation(raw, w, h, mode, image_id, line):
    if not isinstance(raw, list) or not 2 <= len(raw) <= 4:
        raise DatasetError("fixation must be [x, y, t?, dur?]", line, image_id)
    if any(v is not None and (isinstance(v, bool) or not isinstance(v, (int, float)))
           for v in raw):
        raise DatasetError("fixation entries must be numbers", line, image_id)
    if raw[0] is None or raw[1] is None:
        raise DatasetError("fixation x/y may not be null", line, image_id)
    x = _normalize(float(raw[0]), w, mode, "x", image_id, line)
    y = _normalize(float(raw[1]), h, mode, "y", image_id, line)
    t = float(raw[2]) if len(raw) > 2 and raw[2] is not None else None
    dur = float(raw[3]) if len(raw) > 3 and raw[3] is not None else None
    try:
        return Fixation(x, y, t, dur)
    except ValueError as e:
        raise DatasetError(str(e), line, image_id) from None


def parse_record(obj, coordinate_mode="normalized", line=None, base_dir=None) -> DatasetRecord:
    if coordinate_mode not in COORDINATE_MODES:
        raise ValueError(f"unknown coordinate mode {coordinate_mode!r}")
    if not isinstance(obj, dict):
        raise DatasetError("record must be a JSON object", line)
    try:
        image_id = obj["image_id"]
        w, h = obj["width"], obj["height"]
        raw_paths = obj["scanpaths"]
    except KeyError as e:
        raise DatasetError(f"missing field {e.args[0]!r}", line) from None
    if not isinstance(image_id, str):
        raise DatasetError("image_id must be a string", line)
    if not all(isinstance(v, int) and not isinstance(v, bool) and v > 0 for v in (w, h)):
        raise DatasetError("width/height must be positive integers", line, image_id)
    if not isinstance(raw_paths, list) or not raw_paths:
        raise DatasetError("scanpaths must be a non-empty list", line, image_id)

    scanpaths = []
    for raw in raw_paths:
        if not isinstance(raw, list) or not raw:
            raise DatasetError("scanpath must be a non-empty list of fixations", line, image_id)
        fix = [_parse_fixation(f, w, h, coordinate_mode, image_id, line) for f in raw]
        try:
            scanpaths.append(Scanpath(tuple(fix), image_id, w, h))
        except ValueError as e:
            raise DatasetError(str(e), line, image_id) from None

    refs = {}
    for key in ("saliency", "image"):
        ref = obj.get(key)
        if ref is not None and not isinstance(ref, str):
            raise DatasetError(f"{key} must be a string path", line, image_id)
        if ref is not None and base_dir is not None and not os.path.isabs(ref):
            ref = os.path.join(base_dir, ref)
        refs[key] = ref
    split = obj.get("split")
    return DatasetRecord(image_id, w, h, tuple(scanpaths), refs["saliency"], refs["image"],
                         split)


def load_dataset(path, coordinate_mode="normalized") -> list[DatasetRecord]:
    """Load a JSON Lines dataset; raises :class:`DatasetError` with the line number."""
    path = Path(path)
    base_dir = str(path.parent)
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                obj = json.loads(text)
            except json.JSONDecodeError as e:
                raise DatasetError(f"invalid JSON ({e.msg})", lineno) from None
            records.append(parse_record(obj, coordinate_mode, lineno, base_dir))
    return records


def record_to_json(record: DatasetRecord, base_dir=None) -> dict:
    def fix_list(f: Fixation):
        out = [f.x, f.y]
        if f.t is not None or f.dur is not None:
            out.append(f.t)
        if f.dur is not None:
            out.append(f.dur)
        return out

    obj = {"image_id": record.image_id, "width": record.image_width,
           "height": record.image_height,
           "scanpaths": [[fix_list(f) for f in sp.fixations] for sp in record.scanpaths]}
    for key, ref in (("saliency", record.saliency_path), ("image", record.image_path)):
        if ref is not None:
            if base_dir is not None:
                ref = os.path.relpath(os.path.abspath(ref), os.path.abspath(base_dir))
            obj[key] = ref
    if record.split is not None:
        obj["split"] = record.split
    return obj


def dump_dataset(records: Iterable[DatasetRecord], path) -> None:
    """Write records in normalized coordinates; references are made relative to ``path``."""
    path = Path(path)
    base_dir = str(path.parent)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_json(rec, base_dir)) + "\n")


# --------------------------------------------------------------------------
# saliency maps and images

def _read_pgm(data: bytes) -> np.ndarray:
    tokens = []
    pos = 0
    # header: magic, width, height, maxval, each separated by whitespace/comments
    while len(tokens) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError("only binary PGM (P5) is supported")
    w, h, maxval = (int(t) for t in tokens[1:])
    pos += 1  # single whitespace byte before the raster
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = w * h * dtype.itemsize
    raster = data[pos:pos + n]
    if len(raster) != n:
        raise ValueError("truncated PGM raster")
    return np.frombuffer(raster, dtype=dtype).reshape(h, w).astype(np.float64)


def _read_text_grid(text: str) -> np.ndarray:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty saliency grid file")
    try:
        w, h = (int(v) for v in lines[0].split())
        rows = [[float(v) for v in ln.split()] for ln in lines[1:]]
    except ValueError:
        raise ValueError("malformed text saliency grid") from None
    if len(rows) != h or any(len(r) != w for r in rows):
        raise ValueError(f"text grid does not match declared size {w}x{h}")
    return np.array(rows, dtype=np.float64).reshape(h, w)


def load_saliency(path) -> SaliencyMap:
    """Read a binary PGM (8/16-bit) or a plain-text ``W H`` grid."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] == b"P5":
        values = _read_pgm(data)
    else:
        values = _read_text_grid(data.decode("utf-8"))
    return SaliencyMap(values)


def save_saliency(values, path) -> None:
    """Write a grid as text (any suffix) or 16-bit PGM (``.pgm``, rescaled to 0..65535)."""
    values = np.asarray(values, dtype=np.float64)
    h, w = values.shape
    if str(path).lower().endswith(".pgm"):
        peak = values.max()
        scaled = values / peak if peak > 0 else values
        raster = np.rint(scaled * 65535).astype(">u2")
        with open(path, "wb") as fh:
            fh.write(f"P5\n{w} {h}\n65535\n".encode("ascii"))
            fh.write(raster.tobytes())
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(f"{w} {h}\n")
            for row in values:
                fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def resize_bilinear(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resize of an ``(H, W, C)`` array with half-pixel centers."""
    img = np.asarray(img, dtype=np.float64)
    in_h, in_w = img.shape[:2]
    if (in_h, in_w) == (out_h, out_w):
        return img.copy()

    def axis(n_in, n_out):
        src = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        src = np.clip(src, 0, n_in - 1)
        lo = np.floor(src).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, src - lo

    y0, y1, fy = axis(in_h, out_h)
    x0, x1, fx = axis(in_w, out_w)
    fy = fy[:, None, None]
    fx = fx[None, :, None]
    top = img[y0][:, x0] * (1 - fx) + img[y0][:, x1] * fx
    bot = img[y1][:, x0] * (1 - fx) + img[y1][:, x1] * fx
    return top * (1 - fy) + bot * fy


def load_image(path, height: int, width: int) -> np.ndarray:
    """Load an image as a ``(3, height, width)`` float array in ``[0, 1]``.

    ``.npy`` files hold an ``(H, W, 3)`` or ``(H, W)`` float array already
    scaled to ``[0, 1]``; anything else is decoded with Pillow.
    """
    if str(path).endswith(".npy"):
        arr = np.load(path).astype(np.float64)
    else:
        from PIL import Image

        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    if arr.ndim == 2:
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{path}: expected an RGB image")
    return resize_bilinear(arr, height, width).transpose(2, 0, 1)


# --------------------------------------------------------------------------
# statistics and target selection

def length_stats(records: Sequence[DatasetRecord]) -> StatsSummary:
    lengths = sorted(len(sp) for rec in records for sp in rec.scanpaths)
    if not lengths:
        raise ValueError("empty dataset")
    n = len(lengths)
    counts = Counter(lengths)
    top = max(counts.values())
    mode = min(k for k, c in counts.items() if c == top)
    return StatsSummary(
        min=lengths[0],
        max=lengths[-1],
        mean=math.fsum(lengths) / n,
        median=lengths[(n - 1) // 2],
        std=statistics.pstdev(lengths),
        mode=mode,
        mode_share=top / n,
        count=n,
    )


def _image_key(image_id: str) -> int:
    return int.from_bytes(hashlib.blake2b(image_id.encode("utf-8"), digest_size=8).digest(),
                          "little")


def select_random_scanpath(record: DatasetRecord, seed: int) -> Scanpath:
    """Pick one scanpath uniformly, reproducibly for a given ``(seed, image_id)``."""
    rng = np.random.default_rng([seed % 2**64, _image_key(record.image_id)])
    return record.scanpaths[int(rng.integers(len(record.scanpaths)))]


def resample_scanpath(scanpath: Scanpath, n: int) -> Scanpath:
    """Truncate or pad (repeating the last fixation) to exactly ``n`` points."""
    if n < 1:
        raise ValueError("n must be positive")
    fix = [Fixation(f.x, f.y) for f in scanpath.fixations[:n]]
    fix += [fix[-1]] * (n - len(fix))
    return Scanpath(tuple(fix), scanpath.image_id, scanpath.image_width,
                    scanpath.image_height)
