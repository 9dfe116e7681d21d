"""Training loop and the evaluation harness behind the results tables."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import metrics
from . import model as M
from .core import Scanpath, rasterize
from .ingest import DatasetRecord, load_image, load_saliency, resample_scanpath, select_random_scanpath
from .tensor import AdamState, NonFiniteError, adam_step

log = logging.getLogger(__name__)

TABLE_COLUMNS = ("Shape", "Direction", "Length", "Position", "MM Score", "NSS", "Congruency")


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch, image_id, detail=""):
        self.epoch = epoch
        self.image_id = image_id
        super().__init__(f"non-finite loss at epoch {epoch}, image {image_id!r} {detail}".strip())


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 25
    lr: float = 3e-4
    batch_size: int = 1
    seed: int = 0
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.lr <= 0 or self.batch_size < 1:
            raise ValueError("lr and batch_size must be positive")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must lie in [0, 1)")

    @classmethod
    def from_json(cls, d: dict) -> "TrainConfig":
        return cls(**{k: d[k] for k in ("epochs", "lr", "batch_size", "seed", "val_fraction")
                      if k in d})


@dataclass
class EpochLog:
    epoch: int
    train_loss: float
    val_loss: Optional[float]
    seconds: float


@dataclass
class TrainReport:
    epochs: list = field(default_factory=list)
    train_ids: list = field(default_factory=list)
    val_ids: list = field(default_factory=list)
    steps: int = 0
    checkpoint: Optional[str] = None

    def to_json(self, timing=True) -> dict:
        d = asdict(self)
        if not timing:
            for e in d["epochs"]:
                e.pop("seconds")
        return d

    def dump(self, path, timing=True) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(timing), fh, indent=2)
            fh.write("\n")


def _derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence([p % 2**64 for p in parts]).generate_state(1, np.uint64)[0])


def split_records(records: Sequence[DatasetRecord], val_fraction: float, seed: int):
    """Seeded shuffle into disjoint ``(train, val)`` lists covering every record."""
    order = np.random.default_rng(_derive_seed(seed, 0x5EED)).permutation(len(records))
    n_val = int(math.floor(val_fraction * len(records)))
    n_val = min(n_val, len(records) - 1)
    val = [records[i] for i in sorted(order[:n_val])]
    train = [records[i] for i in sorted(order[n_val:])]
    return train, val


def load_images(records: Sequence[DatasetRecord], cfg: M.ModelConfig) -> dict:
    h, w, _ = cfg.input_size
    images = {}
    for rec in records:
        if rec.image_path is None:
            raise ValueError(f"record {rec.image_id!r} has no image reference")
        images[rec.image_id] = load_image(rec.image_path, h, w)
    return images


def _batches(items, size):
    for i in range(0, len(items), size):
        yield items[i:i + size]


def train(records: Sequence[DatasetRecord], model_cfg: M.ModelConfig, train_cfg: TrainConfig,
          images: Optional[Mapping[str, np.ndarray]] = None, model: Optional[M.Model] = None,
          on_step: Optional[Callable[[int, int, float], None]] = None):
    """Fit the regressor with MSE + Adam; returns ``(model, report)``.

    ``images`` maps image_id to a ``(3, H, W)`` array at the model input
    size; when omitted, images are loaded from each record's image path.
    Each epoch visits the training records in a fresh seeded order and
    draws one observer scanpath per image, seeded by the epoch index.
    ``on_step(epoch, step, loss)`` is called after every optimizer update.
    """
    if not records:
        raise ValueError("empty dataset")
    model = model if model is not None else M.build(model_cfg)
    report = TrainReport()
    if train_cfg.epochs == 0:
        return model, report
    if images is None:
        images = load_images(records, model_cfg)

    train_set, val_set = split_records(records, train_cfg.val_fraction, train_cfg.seed)
    report.train_ids = [r.image_id for r in train_set]
    report.val_ids = [r.image_id for r in val_set]
    state = AdamState(lr=train_cfg.lr)
    L = model_cfg.scanpath_len

    for epoch in range(train_cfg.epochs):
        t0 = time.perf_counter()
        rng = np.random.default_rng(_derive_seed(train_cfg.seed, epoch, 1))
        order = [train_set[i] for i in rng.permutation(len(train_set))]
        pick_seed = _derive_seed(train_cfg.seed, epoch, 2)
        losses = []
        for batch in _batches(order, train_cfg.batch_size):
            batch_loss, batch_grads = 0.0, None
            for rec in batch:
                target = resample_scanpath(select_random_scanpath(rec, pick_seed), L)
                try:
                    loss, grads = M.loss_and_grads(model, images[rec.image_id], target)
                except NonFiniteError as e:
                    raise TrainingDiverged(epoch, rec.image_id, f"({e})") from None
                if not math.isfinite(loss):
                    raise TrainingDiverged(epoch, rec.image_id)
                batch_loss += loss
                if batch_grads is None:
                    batch_grads = grads
                else:
                    for acc, g in zip(batch_grads, grads):
                        acc += g
            n = len(batch)
            if n > 1:
                batch_grads = [g / n for g in batch_grads]
            try:
                adam_step(model.params, batch_grads, state)
            except NonFiniteError as e:
                raise TrainingDiverged(epoch, batch[-1].image_id, f"({e})") from None
            losses.append(batch_loss / n)
            report.steps += 1
            if on_step is not None:
                on_step(epoch, report.steps, losses[-1])

        val_loss = None
        if val_set:
            vl = []
            for rec in val_set:
                target = resample_scanpath(select_random_scanpath(rec, pick_seed), L)
                out, _ = M.forward(model, images[rec.image_id])
                vl.append(M.mse_loss(out, target.xy.reshape(1, -1))[0])
            val_loss = float(np.mean(vl))
        entry = EpochLog(epoch + 1, float(np.mean(losses)), val_loss, time.perf_counter() - t0)
        report.epochs.append(entry)
        log.info("epoch %d/%d  train %.6f  val %s  %.2fs", entry.epoch, train_cfg.epochs,
                 entry.train_loss, "n/a" if val_loss is None else f"{val_loss:.6f}",
                 entry.seconds)
    return model, report


# --------------------------------------------------------------------------
# evaluation

@dataclass(frozen=True)
class EvalConfig:
    otsu_bins: int = 256
    observer: Optional[int] = None  # compare against one observer only


@dataclass
class EvalReport:
    name: str
    rows: dict  # column -> mean value or None
    images: int
    comparisons: int

    def as_row(self) -> list:
        return [self.name] + [self.rows[c] for c in TABLE_COLUMNS]


Predictor = Callable[[DatasetRecord], Scanpath]


def model_predictor(model: M.Model, images: Mapping[str, np.ndarray]) -> Predictor:
    def predictor(rec: DatasetRecord) -> Scanpath:
        pred = M.predict(model, images[rec.image_id])
        return pred.to_scanpath(rec.image_id, rec.image_width, rec.image_height)
    return predictor


def evaluate(predictor: Predictor, records: Sequence[DatasetRecord],
             cfg: EvalConfig = EvalConfig(), name: str = "model",
             saliency: Optional[Mapping[str, object]] = None) -> EvalReport:
    """Average MultiMatch against every observer (or one), plus NSS and congruency.

    NSS and congruency need a saliency map; records without one are left
    out of those two columns, which become None if no record has one.
    """
    if not records:
        raise ValueError("empty dataset")
    mm = {c: [] for c in ("Shape", "Direction", "Length", "Position", "MM Score")}
    nss_vals, cong_vals = [], []
    comparisons = 0
    for rec in records:
        pred = predictor(rec)
        if cfg.observer is None:
            truths = rec.scanpaths
        else:
            if cfg.observer >= len(rec.scanpaths):
                continue
            truths = (rec.scanpaths[cfg.observer],)
        per_image = []
        if len(pred) >= 2:
            per_image = [metrics.multimatch(pred, gt) for gt in truths if len(gt) >= 2]
        if per_image:
            comparisons += len(per_image)
            for col, attr in (("Shape", "shape"), ("Direction", "direction"),
                              ("Length", "length"), ("Position", "position"),
                              ("MM Score", "score")):
                mm[col].append(math.fsum(getattr(r, attr) for r in per_image) / len(per_image))

        smap = None
        if saliency is not None and rec.image_id in saliency:
            smap = saliency[rec.image_id]
        elif rec.saliency_path is not None:
            smap = load_saliency(rec.saliency_path)
        if smap is not None:
            values = metrics._as_array(smap)
            fixmap = rasterize(pred, values.shape[1], values.shape[0])
            nss_vals.append(metrics.nss(values, fixmap))
            cong_vals.append(metrics.congruency(values, pred, cfg.otsu_bins))

    def mean(xs):
        return math.fsum(xs) / len(xs) if xs else None

    rows = {c: mean(v) for c, v in mm.items()}
    rows["NSS"] = mean(nss_vals)
    rows["Congruency"] = mean(cong_vals)
    return EvalReport(name, rows, len(records), comparisons)


def format_table(reports: Sequence[EvalReport]) -> str:
    header = ["Model", *TABLE_COLUMNS]
    body = [[r.name] + ["n/a" if r.rows[c] is None else f"{r.rows[c]:.4f}" for c in TABLE_COLUMNS]
            for r in reports]
    widths = [max(len(row[i]) for row in [header] + body) for i in range(len(header))]
    lines = ["  ".join(cell.rjust(w) for cell, w in zip(header, widths))]
    lines.append("-" * len(lines[0]))
    lines += ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in body]
    return "\n".join(lines)


def format_csv(reports: Sequence[EvalReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["Model", *TABLE_COLUMNS])
    for r in reports:
        writer.writerow([r.name] + ["n/a" if r.rows[c] is None else repr(r.rows[c])
                                    for c in TABLE_COLUMNS])
    return buf.getvalue()
