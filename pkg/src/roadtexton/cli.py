"""Command-line interface: train, segment, evaluate, crossval, sweep."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .classifier import classify_image
from .errors import DatasetError, TextonError
from .evaluation import (
    TrainParams, evaluate_images, make_folds, metrics, run_crossval, train_on_regions,
)
from .features import WINDOW_SIZES, FeatureConfig
from .image import ROADSIDE_PALETTE, ClassPalette, decode_label_map, load_rgb, save_rgb
from .superpixels import SegParams
from .textons import Metric, TextonDictionary

log = logging.getLogger("roadtexton")

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg"}
REGION_K = 60
IMAGE_K = 30


@dataclasses.dataclass
class RunConfig:
    textons: int = None  # falls back to the per-command default
    weight: float = 1.0
    filter_size: int = 7
    distance: str = "euclidean"
    seg_sigma: float = 0.5
    seg_k: float = 80.0
    seg_min: int = 80
    seed: int = 0
    palette: str = None
    dataset: str = None
    manifest: str = None
    samples_per_region: int = 120
    restarts: int = 5
    folds: int = 4
    jobs: int = 1

    def seg_params(self):
        return SegParams(self.seg_sigma, self.seg_k, self.seg_min)

    def train_params(self, default_k):
        return TrainParams(k=self.textons or default_k, metric=Metric(self.distance),
                           config=FeatureConfig(self.filter_size),
                           samples_per_region=self.samples_per_region, restarts=self.restarts)

    def load_palette(self):
        return ClassPalette.load(self.palette) if self.palette else ROADSIDE_PALETTE


def image_files(directory):
    return sorted(p for p in Path(directory).iterdir()
                  if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS)


def load_regions(root, palette):
    """Cropped-region dataset: one sub-directory of images per palette class."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset directory {root} does not exist")
    regions = []
    for name in palette.names:
        folder = root / name
        if not folder.is_dir():
            raise DatasetError(f"missing folder for class {name!r}: {folder}")
        files = image_files(folder)
        if not files:
            raise DatasetError(f"no images for class {name!r} in {folder}")
        regs = []
        for f in files:
            try:
                regs.append(load_rgb(f))
            except OSError as exc:
                raise DatasetError(f"cannot read {f}: {exc}") from exc
        regions.append(regs)
    return regions


def read_manifest(path):
    """TSV rows of ``image_path<TAB>label_path``, relative to the manifest."""
    path = Path(path)
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip() or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DatasetError(f"{path}:{lineno}: expected image<TAB>label")
        img, lab = (path.parent / p.strip() for p in parts)
        for f in (img, lab):
            if not f.is_file():
                raise DatasetError(f"{path}:{lineno}: {f} does not exist")
        rows.append((img, lab))
    return rows


def load_manifest_items(path, palette):
    for img_path, lab_path in read_manifest(path):
        try:
            gt = decode_label_map(lab_path.read_bytes(), palette)
        except TextonError as exc:
            raise DatasetError(f"{lab_path}: {exc}") from exc
        yield load_rgb(img_path), gt


def palette_for(dictionary, palette):
    if tuple(dictionary.classes) != palette.names:
        raise DatasetError(
            f"dictionary classes {list(dictionary.classes)} do not match palette {list(palette.names)}")
    return palette


def cmd_train(cfg, args):
    palette = cfg.load_palette()
    regions = load_regions(cfg.dataset, palette)
    params = cfg.train_params(IMAGE_K)
    t0 = time.perf_counter()
    d = train_on_regions(regions, palette.names, params, seed=cfg.seed)
    for name, regs in zip(palette.names, regions):
        n = sum(min(r.shape[0] * r.shape[1], params.samples_per_region) for r in regs)
        print(f"{name}: {len(regs)} regions, {n} samples")
    d.save(args.output)
    print(f"wrote {args.output} ({d.n_classes} classes x {d.k} textons, {time.perf_counter() - t0:.1f}s)")
    return 0


def _segment_one(path, d, cfg, palette, outdir):
    img = load_rgb(path)
    res = classify_image(img, d, cfg.seg_params(), cfg.weight)
    stem = outdir / path.stem
    Path(f"{stem}_labels.png").write_bytes(res.label_png(palette))
    save_rgb(f"{stem}_overlay.png", res.overlay(palette))
    Path(f"{stem}_probs.csv").write_text(res.probability_csv())
    return res.timings


def cmd_segment(cfg, args):
    d = TextonDictionary.load(args.dictionary)
    palette = palette_for(d, cfg.load_palette())
    src = Path(args.input)
    files = image_files(src) if src.is_dir() else [src]
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)

    def run(path):
        try:
            return path, _segment_one(path, d, cfg, palette, outdir), None
        except (OSError, TextonError, ValueError) as exc:
            return path, None, exc

    failed = 0
    with ThreadPoolExecutor(max_workers=max(1, cfg.jobs)) as pool:
        for path, timings, exc in pool.map(run, files):
            if exc is not None:
                failed += 1
                log.error("%s: %s", path, exc)
            else:
                print(f"{path.name}: " + ", ".join(f"{k} {v:.3f}s" for k, v in timings.items()))
    print(f"segmented {len(files) - failed}/{len(files)} images into {outdir}")
    return 1 if failed else 0


def _write_report(report, out, label=""):
    text = report.table(label)
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        Path(f"{out}.json").write_text(report.to_json())
        Path(f"{out}.txt").write_text(text)
    print(text, end="")


def cmd_evaluate(cfg, args):
    d = TextonDictionary.load(args.dictionary)
    palette = palette_for(d, cfg.load_palette())
    items = list(load_manifest_items(cfg.manifest, palette))
    cm, timings = evaluate_images(d, items, cfg.seg_params(), cfg.weight)
    _write_report(metrics(cm, d.classes), args.output, "superpixel")
    return 0


def cmd_crossval(cfg, args):
    palette = cfg.load_palette()
    regions = load_regions(cfg.dataset, palette)
    plan = make_folds([len(r) for r in regions], cfg.folds, cfg.seed)
    res = run_crossval(plan, regions, palette.names, cfg.train_params(REGION_K), (cfg.weight,), cfg.seed)[0]
    print(res.table(), end="")
    if args.output:
        Path(args.output).write_text(json.dumps(res.to_dict(), indent=2))
    return 0


SWEEP_AXES = ("textons", "weight", "filter_size", "metric")


def parse_sweep_values(axis, text):
    """Parse and validate sweep values before anything runs."""
    if text is None:
        if axis == "weight":
            return [round(0.1 * i, 1) for i in range(1, 16)]
        if axis == "filter_size":
            return list(WINDOW_SIZES)
        if axis == "metric":
            return [m.value for m in Metric]
        raise DatasetError("--values is required for the textons axis")
    raw = [v.strip() for v in text.split(",") if v.strip()]
    try:
        if axis == "textons":
            vals = [int(v) for v in raw]
            bad = [v for v in vals if v < 1]
        elif axis == "weight":
            vals = [float(v) for v in raw]
            bad = [v for v in vals if v < 0]
        elif axis == "filter_size":
            vals = [int(v) for v in raw]
            bad = [v for v in vals if v not in WINDOW_SIZES]
        else:
            vals = [Metric(v.lower()).value for v in raw]
            bad = []
    except ValueError as exc:
        raise DatasetError(f"invalid {axis} value: {exc}") from exc
    if bad or not vals:
        raise DatasetError(f"invalid {axis} values: {bad or 'none given'}")
    return vals


def _sweep_row(cfg, axis, value, regions, palette, items):
    cfg = dataclasses.replace(cfg, **{"distance" if axis == "metric" else axis: value})
    if items is None:
        plan = make_folds([len(r) for r in regions], cfg.folds, cfg.seed)
        res = run_crossval(plan, regions, palette.names, cfg.train_params(REGION_K), (cfg.weight,), cfg.seed)[0]
        return res.mean_global, res.overall.average_class_accuracy, res.timings
    d = train_on_regions(regions, palette.names, cfg.train_params(IMAGE_K), seed=cfg.seed)
    cm, timings = evaluate_images(d, items, cfg.seg_params(), cfg.weight)
    rep = metrics(cm, d.classes)
    return rep.global_accuracy, rep.average_class_accuracy, timings


def cmd_sweep(cfg, args):
    values = parse_sweep_values(args.axis, args.values)
    palette = cfg.load_palette()
    regions = load_regions(cfg.dataset, palette)
    items = list(load_manifest_items(cfg.manifest, palette)) if cfg.manifest else None
    rows = []
    if args.axis == "weight" and items is None:
        # dictionaries do not depend on the weight: train each fold once
        plan = make_folds([len(r) for r in regions], cfg.folds, cfg.seed)
        results = run_crossval(plan, regions, palette.names, cfg.train_params(REGION_K), values, cfg.seed)
        for v, res in zip(values, results):
            rows.append((v, res.mean_global, res.overall.average_class_accuracy, res.timings))
    else:
        for v in values:
            rows.append((v, *_sweep_row(cfg, args.axis, v, regions, palette, items)))
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow([args.axis, "global_accuracy", "average_class_accuracy",
                         "feature_seconds", "mapping_seconds"])
        for v, g, a, t in rows:
            writer.writerow([v, f"{g:.4f}", f"{a:.4f}", f"{t.get('features', 0.0):.6f}",
                             f"{t.get('mapping', 0.0):.6f}"])
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


COMMANDS = {
    "train": cmd_train, "segment": cmd_segment, "evaluate": cmd_evaluate,
    "crossval": cmd_crossval, "sweep": cmd_sweep,
}


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with run settings; flags override it")
    common.add_argument("--textons", type=int, help="textons per class (K)")
    common.add_argument("--weight", type=float, help="texture weight w")
    common.add_argument("--filter-size", type=int, choices=WINDOW_SIZES)
    common.add_argument("--distance", choices=[m.value for m in Metric])
    common.add_argument("--seg-sigma", type=float)
    common.add_argument("--seg-k", type=float)
    common.add_argument("--seg-min", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--palette", help="palette JSON")
    common.add_argument("--dataset", help="cropped-region dataset directory")
    common.add_argument("--manifest", help="TSV of image<TAB>label paths")
    common.add_argument("--samples-per-region", type=int)
    common.add_argument("--restarts", type=int)
    common.add_argument("--folds", type=int)
    common.add_argument("--jobs", type=int)
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="roadtexton", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("train", parents=[common], help="learn a texton dictionary from cropped regions")
    p.add_argument("-o", "--output", required=True, help="dictionary JSON to write")
    p = sub.add_parser("segment", parents=[common], help="label images or a directory of frames")
    p.add_argument("dictionary")
    p.add_argument("input", help="image file or directory")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p = sub.add_parser("evaluate", parents=[common], help="score a dictionary against labelled images")
    p.add_argument("dictionary")
    p.add_argument("-o", "--output", help="report path prefix (.json and .txt are added)")
    p = sub.add_parser("crossval", parents=[common], help="k-fold cross-validation on cropped regions")
    p.add_argument("-o", "--output", help="JSON report path")
    p = sub.add_parser("sweep", parents=[common], help="accuracy as one parameter varies")
    p.add_argument("axis", choices=SWEEP_AXES)
    p.add_argument("--values", help="comma-separated values (defaults exist for all but textons)")
    p.add_argument("-o", "--output", help="CSV path (stdout if omitted)")
    return parser


def resolve_config(args):
    cfg = RunConfig()
    if args.config:
        data = json.loads(Path(args.config).read_text())
        unknown = set(data) - {f.name for f in dataclasses.fields(RunConfig)}
        if unknown:
            raise DatasetError(f"unknown config fields: {sorted(unknown)}")
        cfg = dataclasses.replace(cfg, **data)
    overrides = {f.name: getattr(args, f.name) for f in dataclasses.fields(RunConfig)
                 if getattr(args, f.name, None) is not None}
    return dataclasses.replace(cfg, **overrides)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command in ("train", "crossval", "sweep") and not cfg.dataset:
            raise DatasetError("--dataset is required")
        if args.command == "evaluate" and not cfg.manifest:
            raise DatasetError("--manifest is required")
        return COMMANDS[args.command](cfg, args)
    except (TextonError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
