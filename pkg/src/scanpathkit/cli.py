"""``scanpathkit`` command line.

Exit codes: 0 success, 2 input error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import baselines, ingest, plots
from . import model as M
from .ingest import DatasetError
from .tensor import NonFiniteError
from .trainer import (EvalConfig, TrainConfig, TrainingDiverged, evaluate, format_csv,
                      format_table, load_images, model_predictor, train, _derive_seed)

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3
BASELINES = ("center", "wta", "gt-echo")

log = logging.getLogger("scanpathkit")


class InputError(Exception):
    pass


def _emit(text: str, out) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _image_seed(seed: int, image_id: str) -> int:
    return _derive_seed(seed, ingest._image_key(image_id))


def _load(args):
    records = ingest.load_dataset(args.dataset, args.coords)
    return records


def _baseline_predictor(name, seed, n=8):
    if name == "center":
        return lambda rec: baselines.center_bias(n, _image_seed(seed, rec.image_id),
                                                 rec.image_id, rec.image_width, rec.image_height)
    if name == "wta":
        def wta(rec):
            if rec.saliency_path is None:
                raise InputError(f"wta baseline needs a saliency map for {rec.image_id!r}")
            return baselines.wta_scanpath(ingest.load_saliency(rec.saliency_path),
                                          baselines.WtaConfig(n_fixations=n), rec.image_id,
                                          rec.image_width, rec.image_height)
        return wta
    if name == "gt-echo":
        return lambda rec: rec.scanpaths[0]
    raise InputError(f"unknown baseline {name!r} (choose from {', '.join(BASELINES)})")


def _checkpoint_predictor(path, records):
    model = M.Model.load(path)
    images = load_images(records, model.config)
    return model_predictor(model, images)


def resolve_source(source: str, records, seed: int) -> dict:
    """Map image_id to the scanpaths named by ``source``.

    ``gt`` (every observer), ``gt:K`` (observer K), ``center``, ``wta``,
    ``checkpoint:PATH``, or a predictions file in the dataset format.
    """
    if source == "gt":
        return {r.image_id: list(r.scanpaths) for r in records}
    if source.startswith("gt:"):
        k = int(source[3:])
        return {r.image_id: [r.scanpaths[k]] for r in records if k < len(r.scanpaths)}
    if source in ("center", "wta"):
        pred = _baseline_predictor(source, seed)
        return {r.image_id: [pred(r)] for r in records}
    if source.startswith("checkpoint:"):
        pred = _checkpoint_predictor(source[len("checkpoint:"):], records)
        return {r.image_id: [pred(r)] for r in records}
    if not os.path.exists(source):
        raise InputError(f"unknown scanpath source {source!r}")
    return {r.image_id: list(r.scanpaths) for r in ingest.load_dataset(source)}


# --------------------------------------------------------------------------
# commands

def cmd_stats(args) -> int:
    records = _load(args)
    groups = {"all": records}
    splits = sorted({r.split for r in records if r.split is not None})
    for name in splits:
        groups[name] = [r for r in records if r.split == name]
    summaries = {name: ingest.length_stats(recs) for name, recs in groups.items()}
    payload = {name: s.as_dict() for name, s in summaries.items()}
    if args.format == "json":
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    elif args.format == "csv":
        keys = ("min", "max", "mean", "median", "std", "mode", "mode_share", "count")
        rows = [",".join(("split",) + keys)]
        rows += [",".join([name] + [repr(d[k]) for k in keys]) for name, d in payload.items()]
        text = "\n".join(rows) + "\n"
    else:
        text = "\n\n".join(f"[{name}]\n{s.table_row()}" for name, s in summaries.items()) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def _read_config(path):
    if path is None:
        return {}, {}
    with open(path, encoding="utf-8") as fh:
        cfg = json.load(fh)
    if "model" in cfg or "train" in cfg:
        return cfg.get("model", {}), cfg.get("train", {})
    model_keys = {"input_size", "blocks", "scanpath_len"}
    return ({k: v for k, v in cfg.items() if k in model_keys},
            {k: v for k, v in cfg.items() if k not in model_keys})


def cmd_train(args) -> int:
    if not args.out:
        raise InputError("train needs --out for the checkpoint path")
    records = _load(args)
    if not records:
        raise InputError("empty dataset")
    model_json, train_json = _read_config(args.config)
    if args.seed is not None:
        model_json["seed"] = train_json["seed"] = args.seed
    model_cfg = M.ModelConfig.from_json(model_json)
    train_cfg = TrainConfig.from_json(train_json)
    model, report = train(records, model_cfg, train_cfg)
    model.save(args.out)
    report.checkpoint = str(args.out)
    report_path = args.report or str(args.out) + ".report.json"
    report.dump(report_path)
    if report.epochs:
        last = report.epochs[-1]
        print(f"trained {len(report.epochs)} epochs, final train loss {last.train_loss:.6g}; "
              f"checkpoint {args.out}, report {report_path}")
    else:
        print(f"no epochs run; checkpoint {args.out} holds the initialization")
    return EXIT_OK


def cmd_predict(args) -> int:
    records = _load(args)
    if args.image_id:
        records = [r for r in records if r.image_id == args.image_id]
        if not records:
            raise InputError(f"unknown image_id {args.image_id!r}")
    model = M.Model.load(args.checkpoint)
    images = load_images(records, model.config)
    lines = []
    for rec in records:
        pred = M.predict(model, images[rec.image_id])
        obj = {"image_id": rec.image_id, "width": rec.image_width, "height": rec.image_height,
               "scanpaths": [[[float(x), float(y)] for x, y in pred.clamped]],
               "raw": [[float(x), float(y)] for x, y in pred.points]}
        lines.append(json.dumps(obj))
    _emit("".join(line + "\n" for line in lines), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    records = _load(args)
    if not records:
        raise InputError("empty dataset")
    if not args.checkpoint and not args.baseline:
        raise InputError("eval needs --checkpoint or --baseline")
    seed = args.seed or 0
    cfg = EvalConfig(otsu_bins=args.bins, observer=args.observer)
    reports = []
    for path in args.checkpoint or []:
        reports.append(evaluate(_checkpoint_predictor(path, records), records, cfg,
                                name=Path(path).stem))
    for name in args.baseline or []:
        reports.append(evaluate(_baseline_predictor(name, seed), records, cfg, name=name))
    if args.format == "csv":
        text = format_csv(reports)
    elif args.format == "json":
        text = json.dumps([{"model": r.name, "images": r.images, "comparisons": r.comparisons,
                            **r.rows} for r in reports], indent=2) + "\n"
    else:
        text = format_table(reports) + "\n"
    _emit(text, args.out)
    return EXIT_OK


def cmd_render(args) -> int:
    records = {r.image_id: r for r in _load(args)}
    rec = records.get(args.image_id)
    if rec is None:
        raise InputError(f"unknown image_id {args.image_id!r}")
    paths = resolve_source(args.source, [rec], args.seed or 0).get(rec.image_id)
    if not paths:
        raise InputError(f"source {args.source!r} has no scanpath for {rec.image_id!r}")
    background = None
    if rec.image_path and not rec.image_path.endswith(".npy") and os.path.exists(rec.image_path):
        background = rec.image_path
    spec = plots.RenderSpec(width=args.size)
    svg = plots.render_svg(paths, rec.image_width, rec.image_height, spec, background,
                           title=f"{rec.image_id} ({args.source})")
    _emit(svg, args.out)
    return EXIT_OK


def cmd_density(args) -> int:
    records = _load(args)
    by_image = resolve_source(args.source, records, args.seed or 0)
    xy = [sp.xy for rid in sorted(by_image) for sp in by_image[rid]]
    if not xy:
        raise InputError("no fixations")
    grid = plots.density_grid(np.concatenate(xy), args.bins)
    if args.out:
        ingest.save_saliency(grid, args.out)
    else:
        sys.stdout.write(f"{args.bins} {args.bins}\n")
        for row in grid:
            sys.stdout.write(" ".join(repr(float(v)) for v in row) + "\n")
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="seed for every random draw")
    common.add_argument("--format", choices=("json", "csv", "text"), default="text")
    common.add_argument("--out", default=None, help="output path (stdout if omitted)")
    common.add_argument("--coords", choices=ingest.COORDINATE_MODES, default="normalized",
                        help="coordinate convention of the dataset file")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="scanpathkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("stats", parents=[common], help="scanpath length statistics")
    p.add_argument("dataset")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", parents=[common], help="train the regressor")
    p.add_argument("dataset")
    p.add_argument("--config", help="JSON with model/train fields")
    p.add_argument("--report", help="report path (default <out>.report.json)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="predict scanpaths from a checkpoint")
    p.add_argument("dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--image-id")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", parents=[common], help="MultiMatch/NSS/Congruency table")
    p.add_argument("dataset")
    p.add_argument("--checkpoint", action="append")
    p.add_argument("--baseline", action="append", help=f"one of {', '.join(BASELINES)}")
    p.add_argument("--observer", type=int, default=None,
                   help="compare against this observer only (default: all, averaged)")
    p.add_argument("--bins", type=int, default=256, help="Otsu histogram bins")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("render", parents=[common], help="SVG scanpath overlay")
    p.add_argument("dataset")
    p.add_argument("image_id")
    p.add_argument("--source", default="gt:0",
                   help="gt, gt:K, center, wta, checkpoint:PATH or a predictions file")
    p.add_argument("--size", type=int, default=640, help="output width in px")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("density", parents=[common], help="fixation density grid")
    p.add_argument("dataset")
    p.add_argument("--source", default="gt")
    p.add_argument("--bins", type=int, default=16)
    p.set_defaults(func=cmd_density)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (TrainingDiverged, NonFiniteError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (InputError, DatasetError, ValueError, OSError, KeyError, IndexError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
