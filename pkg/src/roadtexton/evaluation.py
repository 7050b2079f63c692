"""Pixelwise scoring and the per-class k-fold cross-validation harness."""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .classifier import IMAGE_SIZE, classify_features, classify_image, classify_pixelwise
from .errors import ClassTooSmall, DimensionMismatch
from .features import FeatureConfig, extract_features
from .image import UNKNOWN, resize_nearest
from .textons import Metric, TrainingSamples, sample_pixels, train_dictionary

log = logging.getLogger(__name__)


@dataclass
class ConfusionMatrix:
    """Counts indexed ``[ground truth, prediction]``; UNKNOWN truth is only counted as ignored."""

    counts: np.ndarray
    ignored: int = 0

    @classmethod
    def empty(cls, n_classes):
        return cls(np.zeros((n_classes, n_classes), dtype=np.int64))

    @property
    def n_classes(self):
        return len(self.counts)

    def __add__(self, other):
        return ConfusionMatrix(self.counts + other.counts, self.ignored + other.ignored)

    def row_percentages(self):
        rows = self.counts.sum(axis=1, keepdims=True)
        return np.divide(100.0 * self.counts, rows, out=np.zeros(self.counts.shape), where=rows > 0)


def confusion(pred, gt, n_classes):
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise DimensionMismatch(f"prediction {pred.shape} vs ground truth {gt.shape}")
    known = gt != UNKNOWN
    g = gt[known].astype(np.int64)
    p = pred[known].astype(np.int64)
    if ((g < 0) | (g >= n_classes)).any() or ((p < 0) | (p >= n_classes)).any():
        raise ValueError(f"labels outside 0..{n_classes - 1}")
    counts = np.bincount(g * n_classes + p, minlength=n_classes * n_classes)
    return ConfusionMatrix(counts.reshape(n_classes, n_classes), int((~known).sum()))


@dataclass
class MetricsReport:
    global_accuracy: float
    class_accuracies: list  # None for classes without ground-truth pixels
    average_class_accuracy: float
    pixel_counts: list
    ignored: int
    class_names: tuple = ()
    confusion: list = field(default_factory=list)

    def to_dict(self):
        return {
            "global_accuracy": self.global_accuracy,
            "average_class_accuracy": self.average_class_accuracy,
            "class_accuracies": dict(zip(self._names(), self.class_accuracies)),
            "pixel_counts": dict(zip(self._names(), self.pixel_counts)),
            "ignored_pixels": self.ignored,
            "confusion": self.confusion,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def _names(self):
        return list(self.class_names) or [str(i) for i in range(len(self.class_accuracies))]

    def table(self, label=""):
        names = self._names()
        head = [""] + names + ["Average", "Global"]
        vals = ["-" if a is None else f"{a:.1f}" for a in self.class_accuracies]
        row = [label] + vals + [f"{self.average_class_accuracy:.1f}", f"{self.global_accuracy:.1f}"]
        widths = [max(len(a), len(b)) for a, b in zip(head, row)]
        fmt = "  ".join(f"{{:>{w}}}" for w in widths)
        return fmt.format(*head) + "\n" + fmt.format(*row) + "\n"


def metrics(cm, class_names=()):
    counts = cm.counts
    rows = counts.sum(axis=1)
    total = int(counts.sum())
    per_class = [100.0 * counts[i, i] / rows[i] if rows[i] else None for i in range(len(counts))]
    populated = [a for a in per_class if a is not None]
    return MetricsReport(
        global_accuracy=100.0 * np.trace(counts) / total if total else 0.0,
        class_accuracies=per_class,
        average_class_accuracy=float(np.mean(populated)) if populated else 0.0,
        pixel_counts=[int(r) for r in rows],
        ignored=cm.ignored,
        class_names=tuple(class_names),
        confusion=counts.tolist(),
    )


@dataclass(frozen=True)
class CrossValPlan:
    """``folds[c][f]`` lists the region indices of class ``c`` held out in fold ``f``."""

    folds: tuple
    seed: int

    @property
    def n_folds(self):
        return len(self.folds[0]) if self.folds else 0

    def split(self, fold):
        """(train, test) index lists per class for one fold."""
        train = [sorted(i for f, part in enumerate(parts) if f != fold for i in part) for parts in self.folds]
        test = [list(parts[fold]) for parts in self.folds]
        return train, test


def make_folds(region_counts, folds=4, seed=0):
    """Shuffle each class's regions and deal them round-robin into ``folds`` parts."""
    rng = np.random.default_rng(seed)
    plan = []
    for c, n in enumerate(region_counts):
        if n < folds:
            raise ClassTooSmall(f"class {c} has {n} regions, need at least {folds}")
        order = rng.permutation(n)
        plan.append(tuple(tuple(int(i) for i in order[f::folds]) for f in range(folds)))
    return CrossValPlan(tuple(plan), seed)


@dataclass
class CrossValResult:
    folds: list             # MetricsReport per fold
    overall: MetricsReport  # pooled over all folds
    mean_global: float
    std_global: float
    timings: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "mean_global_accuracy": self.mean_global,
            "std_global_accuracy": self.std_global,
            "folds": [f.to_dict() for f in self.folds],
            "overall": self.overall.to_dict(),
        }

    def table(self):
        lines = [f.table(f"fold {i}") for i, f in enumerate(self.folds)]
        lines.append(self.overall.table("pooled"))
        lines.append(f"global accuracy {self.mean_global:.1f} +/- {self.std_global:.1f}\n")
        return "".join(lines)


@dataclass
class TrainParams:
    k: int = 60
    metric: Metric = Metric.EUCLIDEAN
    config: FeatureConfig = field(default_factory=FeatureConfig)
    samples_per_region: int = 120
    restarts: int = 5
    max_iter: int = 100


def region_samples(features_by_class, indices_by_class, n, seed):
    base = [int(v) for v in np.atleast_1d(seed)]
    parts = []
    for c, (feats, idx) in enumerate(zip(features_by_class, indices_by_class)):
        for i in idx:
            parts.append(sample_pixels(feats[i], c, n, seed=base + [c, int(i)]))
    return TrainingSamples.concat(parts)


def train_on_regions(regions_by_class, classes, params, seed=0, features_by_class=None):
    """Sample every region and learn a dictionary from all of them."""
    if features_by_class is None:
        features_by_class = [[extract_features(r, params.config) for r in regs] for regs in regions_by_class]
    idx = [range(len(f)) for f in features_by_class]
    samples = region_samples(features_by_class, idx, params.samples_per_region, seed)
    return train_dictionary(samples, classes, params.k, params.metric, params.config, seed,
                            restarts=params.restarts, max_iter=params.max_iter)


def run_crossval(plan, regions_by_class, classes, params, weights=(1.0,), seed=0):
    """Train on all folds but one, label each held-out region as a single superpixel.

    Returns one ``CrossValResult`` per entry of ``weights`` (training does not
    depend on the weight, so a weight sweep reuses each fold's dictionary).
    """
    n_classes = len(classes)
    t0 = time.perf_counter()
    feats = [[extract_features(r, params.config) for r in regs] for regs in regions_by_class]
    t_feat = time.perf_counter() - t0
    cms = [[] for _ in weights]
    t_map = 0.0
    for fold in range(plan.n_folds):
        train_idx, test_idx = plan.split(fold)
        samples = region_samples(feats, train_idx, params.samples_per_region, [seed, fold])
        d = train_dictionary(samples, classes, params.k, params.metric, params.config,
                             seed=seed, restarts=params.restarts, max_iter=params.max_iter)
        log.info("fold %d: trained on %d samples", fold, len(samples))
        t1 = time.perf_counter()
        fold_cm = [ConfusionMatrix.empty(n_classes) for _ in weights]
        for c, idx in enumerate(test_idx):
            for i in idx:
                area = feats[c][i].shape[0] * feats[c][i].shape[1]
                for j, w in enumerate(weights):
                    label, _ = classify_features(feats[c][i], d, w)
                    fold_cm[j].counts[c, label] += area
        t_map += time.perf_counter() - t1
        for j in range(len(weights)):
            cms[j].append(fold_cm[j])
    n_regions = sum(len(r) for r in regions_by_class)
    timings = {"features": t_feat / max(n_regions, 1), "mapping": t_map / max(n_regions * len(weights), 1)}
    results = []
    for fold_cms in cms:
        reports = [metrics(cm, classes) for cm in fold_cms]
        pooled = fold_cms[0]
        for cm in fold_cms[1:]:
            pooled = pooled + cm
        g = np.array([r.global_accuracy for r in reports])
        results.append(CrossValResult(reports, metrics(pooled, classes), float(g.mean()),
                                      float(g.std(ddof=1)) if len(g) > 1 else 0.0, dict(timings)))
    return results


def evaluate_images(dictionary, items, params=None, weight=1.0, pixelwise=False):
    """Aggregate confusion over ``(rgb, ground_truth)`` pairs; both are resized to 320x240."""
    total = ConfusionMatrix.empty(dictionary.n_classes)
    timings = {"features": 0.0, "superpixels": 0.0, "mapping": 0.0}
    n = 0
    for rgb, gt in items:
        if pixelwise:
            res = classify_pixelwise(rgb, dictionary, weight)
        else:
            res = classify_image(rgb, dictionary, params, weight)
        gt = resize_nearest(gt, *IMAGE_SIZE)
        total = total + confusion(res.labels, gt, dictionary.n_classes)
        for key, v in res.timings.items():
            timings[key] = timings.get(key, 0.0) + v
        n += 1
    if n:
        timings = {key: v / n for key, v in timings.items()}
    return total, timings
