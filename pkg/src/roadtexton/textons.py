"""Class-semantic texton learning: distances, K-means, dictionaries.

Each class gets its own K colour textons and K texture textons, learned by
K-means over that class's training pixels. The per-class sets are stacked
class-major into two ``(C * K, D)`` matrices.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from enum import Enum

import numba
import numpy as np

from .errors import (
    ClassUnderpopulated, CorruptFile, DimensionMismatch, EmptyRegion,
    FormatVersionMismatch, TooFewPoints,
)
from .features import COLOR_DIM, TEXTURE_DIM, FeatureConfig, extract_features

log = logging.getLogger(__name__)

FORMAT_VERSION = "1"


class Metric(str, Enum):
    EUCLIDEAN = "euclidean"  # squared
    CITYBLOCK = "cityblock"
    COSINE = "cosine"
    CORRELATION = "correlation"

    @property
    def code(self):
        return _METRIC_CODES[self]


_METRIC_CODES = {Metric.EUCLIDEAN: 0, Metric.CITYBLOCK: 1, Metric.COSINE: 2, Metric.CORRELATION: 3}


@numba.njit(cache=True)
def _dist(a, b, code):
    n = a.shape[0]
    if code == 0:
        s = 0.0
        for i in range(n):
            d = a[i] - b[i]
            s += d * d
        return s
    if code == 1:
        s = 0.0
        for i in range(n):
            s += abs(a[i] - b[i])
        return s
    ma = 0.0
    mb = 0.0
    if code == 3:
        for i in range(n):
            ma += a[i]
            mb += b[i]
        ma /= n
        mb /= n
    dot = 0.0
    na = 0.0
    nb = 0.0
    for i in range(n):
        x = a[i] - ma
        y = b[i] - mb
        dot += x * y
        na += x * x
        nb += y * y
    if na == 0.0 or nb == 0.0:
        return 1.0
    return 1.0 - dot / (np.sqrt(na) * np.sqrt(nb))


_BLOCK = 512


@numba.njit(cache=True)
def _prepare(x, code):
    # centred copy (correlation) and squared norms, summed in index order
    n, dim = x.shape
    out = x.copy()
    norms = np.zeros(n)
    if code < 2:
        return out, norms
    for j in range(n):
        if code == 3:
            m = 0.0
            for i in range(dim):
                m += x[j, i]
            m /= dim
            for i in range(dim):
                out[j, i] = x[j, i] - m
        s = 0.0
        for i in range(dim):
            s += out[j, i] * out[j, i]
        norms[j] = s
    return out, norms


@numba.njit(cache=True)
def _nearest(points, centers, code):
    # points are swept column-wise in blocks so the inner loop vectorises;
    # every pair still accumulates over dimensions 0..D-1 in order, exactly
    # like _dist
    n, dim = points.shape
    p, pn = _prepare(points, code)
    c, cn = _prepare(centers, code)
    pt = np.ascontiguousarray(p.T)
    idx = np.zeros(n, dtype=np.int64)
    best = np.empty(n, dtype=np.float64)
    acc = np.empty(_BLOCK)
    for start in range(0, n, _BLOCK):
        stop = min(start + _BLOCK, n)
        b = stop - start
        for j in range(b):
            best[start + j] = np.inf
        for k in range(c.shape[0]):
            for j in range(b):
                acc[j] = 0.0
            for i in range(dim):
                ci = c[k, i]
                row = pt[i]
                if code == 0:
                    for j in range(b):
                        t = row[start + j] - ci
                        acc[j] += t * t
                elif code == 1:
                    for j in range(b):
                        acc[j] += abs(row[start + j] - ci)
                else:
                    for j in range(b):
                        acc[j] += row[start + j] * ci
            if code >= 2:
                for j in range(b):
                    na = pn[start + j]
                    if na == 0.0 or cn[k] == 0.0:
                        acc[j] = 1.0
                    else:
                        acc[j] = 1.0 - acc[j] / (np.sqrt(na) * np.sqrt(cn[k]))
            for j in range(b):
                if acc[j] < best[start + j]:
                    best[start + j] = acc[j]
                    idx[start + j] = k
    return idx, best


def distance(metric, a, b):
    """Distance between two vectors; see ``Metric`` for the definitions.

    Cosine against a zero vector and correlation against a constant vector
    are defined as 1.
    """
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatch(f"vectors of length {a.shape} and {b.shape}")
    return max(float(_dist(a, b, Metric(metric).code)), 0.0)


def nearest(metric, points, centers):
    """Index of, and distance to, the nearest center for every point.

    Ties go to the lowest center index.
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    centers = np.ascontiguousarray(centers, dtype=np.float64)
    if points.shape[1] != centers.shape[1]:
        raise DimensionMismatch(f"points are {points.shape[1]}-D, centers {centers.shape[1]}-D")
    return _nearest(points, centers, Metric(metric).code)


def _update_center(metric, members, old):
    if metric is Metric.EUCLIDEAN:
        return members.mean(axis=0)
    if metric is Metric.CITYBLOCK:
        return np.median(members, axis=0)
    if metric is Metric.CORRELATION:
        members = members - members.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(members, axis=1, keepdims=True)
    unit = np.divide(members, norms, out=np.zeros_like(members), where=norms > 0)
    mean = unit.mean(axis=0)
    norm = np.linalg.norm(mean)
    return mean / norm if norm > 0 else old


def _update_centers(metric, points, labels, centers):
    k = len(centers)
    out = centers.copy()
    counts = np.bincount(labels, minlength=k)
    if metric is Metric.EUCLIDEAN:
        # mean offset from one member of each cluster: exact for identical points
        filled = counts > 0
        first = np.zeros(k, dtype=np.int64)
        first[labels[::-1]] = np.arange(len(labels))[::-1]
        ref = points[first]
        shifted = points - ref[labels]
        sums = np.stack([np.bincount(labels, weights=col, minlength=k) for col in shifted.T], axis=1)
        out[filled] = ref[filled] + sums[filled] / counts[filled, None]
        return out
    order = np.argsort(labels, kind="stable")
    groups = np.split(points[order], np.cumsum(counts)[:-1])
    for c, members in enumerate(groups):
        if len(members):
            out[c] = _update_center(metric, members, centers[c])
    return out


@numba.njit(cache=True)
def _hartigan(points, labels, k):
    # move single points between clusters while that lowers the squared-error
    # sum; Lloyd fixed points are not always stable under such moves
    n, dim = points.shape
    counts = np.zeros(k, dtype=np.int64)
    sums = np.zeros((k, dim))
    for j in range(n):
        counts[labels[j]] += 1
        for i in range(dim):
            sums[labels[j], i] += points[j, i]
    moved = True
    passes = 0
    while moved and passes < 1000:
        moved = False
        passes += 1
        for j in range(n):
            a = labels[j]
            if counts[a] <= 1:
                continue
            out_cost = 0.0
            for i in range(dim):
                t = points[j, i] - sums[a, i] / counts[a]
                out_cost += t * t
            out_cost *= counts[a] / (counts[a] - 1.0)
            best = -1
            best_cost = out_cost
            for b in range(k):
                if b == a:
                    continue
                in_cost = 0.0
                if counts[b] > 0:
                    for i in range(dim):
                        t = points[j, i] - sums[b, i] / counts[b]
                        in_cost += t * t
                    in_cost *= counts[b] / (counts[b] + 1.0)
                if in_cost < best_cost * (1.0 - 1e-12):
                    best_cost = in_cost
                    best = b
            if best >= 0:
                for i in range(dim):
                    sums[a, i] -= points[j, i]
                    sums[best, i] += points[j, i]
                counts[a] -= 1
                counts[best] += 1
                labels[j] = best
                moved = True
    return labels


def _kmeanspp(points, k, metric, rng):
    n = len(points)
    centers = [points[rng.integers(n)]]
    closest = nearest(metric, points, np.array(centers))[1]
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            i = rng.integers(n)
        else:
            i = int(np.searchsorted(np.cumsum(closest), rng.random() * total, side="right"))
            i = min(i, n - 1)
        centers.append(points[i])
        closest = np.minimum(closest, nearest(metric, points, points[i:i + 1])[1])
    return np.array(centers)


@dataclass
class KMeansResult:
    centers: np.ndarray
    labels: np.ndarray
    objective: float
    history: list  # objective after every assignment step of the winning run
    n_iter: int


def _lloyd(points, centers, metric, max_iter):
    labels, dist = nearest(metric, points, centers)
    history = [float(dist.sum())]
    it = 0
    for it in range(1, max_iter + 1):
        centers = _update_centers(metric, points, labels, centers)
        # an empty cluster takes the point worst served by its current center
        counts = np.bincount(labels, minlength=len(centers))
        for c in range(len(centers)):
            if counts[c] == 0:
                far = int(np.argmax(dist))
                centers[c] = points[far]
                labels[far] = c
                dist[far] = 0.0
        new_labels, dist = nearest(metric, points, centers)
        history.append(float(dist.sum()))
        if np.array_equal(new_labels, labels):
            labels = new_labels
            break
        labels = new_labels
    return KMeansResult(centers, labels, history[-1], history, it)


def _polish(points, run, max_iter):
    labels = _hartigan(points, run.labels.copy(), len(run.centers))
    if np.array_equal(labels, run.labels):
        return run
    centers = _update_centers(Metric.EUCLIDEAN, points, labels, run.centers)
    more = _lloyd(points, centers, Metric.EUCLIDEAN, max_iter)
    return KMeansResult(more.centers, more.labels, more.objective,
                        run.history + more.history, run.n_iter + more.n_iter)


def kmeans(points, k, metric=Metric.EUCLIDEAN, seed=0, max_iter=100, restarts=5):
    """K-means under ``metric`` with k-means++ seeding; best of ``restarts`` runs.

    Euclidean runs are finished with single-point (Hartigan) moves, which
    escape some Lloyd fixed points that are not local optima. The objective is the sum over points of the metric distance to the
    nearest center (for Euclidean, the squared distance).
    """
    points = np.ascontiguousarray(points, dtype=np.float64)
    metric = Metric(metric)
    if k < 1 or len(points) < k:
        raise TooFewPoints(f"need at least k={k} points, got {len(points)}")
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(max(1, restarts)):
        run = _lloyd(points, _kmeanspp(points, k, metric, rng), metric, max_iter)
        if metric is Metric.EUCLIDEAN and k > 1:
            run = _polish(points, run, max_iter)
        if best is None or run.objective < best.objective:
            best = run
    return best


@dataclass(frozen=True)
class TrainingSamples:
    """Sampled training pixels: class index plus colour and texture features."""

    labels: np.ndarray   # (N,)
    color: np.ndarray    # (N, 6)
    texture: np.ndarray  # (N, 17)

    def __len__(self):
        return len(self.labels)

    @classmethod
    def concat(cls, parts):
        parts = list(parts)
        if not parts:
            return cls(np.empty(0, np.int64), np.empty((0, COLOR_DIM)), np.empty((0, TEXTURE_DIM)))
        return cls(
            np.concatenate([p.labels for p in parts]),
            np.concatenate([p.color for p in parts]),
            np.concatenate([p.texture for p in parts]),
        )

    def counts(self, n_classes):
        return np.bincount(self.labels, minlength=n_classes)


def sample_pixels(features, class_index, n, seed):
    """Draw ``n`` distinct pixels (all of them if the region is smaller)."""
    h, w = features.shape
    area = h * w
    if area == 0:
        raise EmptyRegion("region has no pixels")
    rng = np.random.default_rng(seed)
    idx = rng.choice(area, size=n, replace=False) if area >= n else np.arange(area)
    return TrainingSamples(
        labels=np.full(len(idx), class_index, dtype=np.int64),
        color=features.color.reshape(area, -1)[idx],
        texture=features.texture.reshape(area, -1)[idx],
    )


def sample_training_pixels(region, class_index, n=120, seed=0, config=None):
    """Extract features over a cropped region and sample ``n`` of its pixels."""
    region = np.asarray(region)
    if region.size == 0:
        raise EmptyRegion("region has no pixels")
    return sample_pixels(extract_features(region, config), class_index, n, seed)


@dataclass(frozen=True)
class TextonDictionary:
    classes: tuple
    k: int
    metric: Metric
    config: FeatureConfig
    seed: int
    color: np.ndarray    # (C * K, 6), class-major
    texture: np.ndarray  # (C * K, 17), class-major

    @property
    def n_classes(self):
        return len(self.classes)

    def class_of_row(self, row):
        return np.asarray(row) // self.k

    def __eq__(self, other):
        if not isinstance(other, TextonDictionary):
            return NotImplemented
        return (self.classes == other.classes and self.k == other.k
                and self.metric == other.metric and self.config == other.config
                and self.seed == other.seed
                and np.array_equal(self.color, other.color)
                and np.array_equal(self.texture, other.texture))

    __hash__ = None

    def to_json(self):
        doc = {
            "format_version": FORMAT_VERSION,
            "classes": list(self.classes),
            "k": self.k,
            "metric": self.metric.value,
            "filter_size": self.config.filter_size,
            "normalization": self.config.normalization,
            "seed": self.seed,
            "color_textons": self.color.tolist(),
            "texture_textons": self.texture.tolist(),
        }
        return json.dumps(doc, indent=1)

    @classmethod
    def from_json(cls, text):
        try:
            doc = json.loads(text)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise CorruptFile(f"dictionary is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise CorruptFile("dictionary must be a JSON object")
        if doc.get("format_version") != FORMAT_VERSION:
            raise FormatVersionMismatch(
                f"dictionary format {doc.get('format_version')!r}, expected {FORMAT_VERSION!r}")
        try:
            classes = tuple(doc["classes"])
            k = int(doc["k"])
            color = np.array(doc["color_textons"], dtype=np.float64)
            texture = np.array(doc["texture_textons"], dtype=np.float64)
            d = cls(classes=classes, k=k, metric=Metric(doc["metric"]),
                    config=FeatureConfig(int(doc["filter_size"]), doc["normalization"]),
                    seed=int(doc["seed"]), color=color, texture=texture)
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptFile(f"malformed dictionary: {exc}") from exc
        rows = len(classes) * k
        if color.shape != (rows, COLOR_DIM) or texture.shape != (rows, TEXTURE_DIM):
            raise CorruptFile(f"texton matrices do not match {len(classes)} classes x k={k}")
        if not (np.isfinite(color).all() and np.isfinite(texture).all()):
            raise CorruptFile("non-finite texton values")
        return d

    def save(self, path):
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_json())

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_json(fh.read())


def _canonical(centers):
    # lexicographic row order, first column most significant
    return centers[np.lexsort(centers.T[::-1])]


def train_dictionary(samples, classes, k, metric=Metric.EUCLIDEAN, config=None, seed=0,
                     restarts=5, max_iter=100):
    """Learn K colour and K texture textons for every class."""
    config = config or FeatureConfig()
    metric = Metric(metric)
    classes = tuple(classes)
    counts = samples.counts(len(classes))
    for i, n in enumerate(counts):
        if n < k:
            raise ClassUnderpopulated(i, int(n), k)
    color, texture = [], []
    for i in range(len(classes)):
        mask = samples.labels == i
        for kind, feats, out in (("color", samples.color, color), ("texture", samples.texture, texture)):
            sub_seed = [seed, i, 0 if kind == "color" else 1]
            res = kmeans(feats[mask], k, metric, seed=sub_seed, max_iter=max_iter, restarts=restarts)
            out.append(_canonical(res.centers))
            log.debug("class %s %s textons: J=%.6g after %d iterations", classes[i], kind,
                      res.objective, res.n_iter)
    return TextonDictionary(classes=classes, k=k, metric=metric, config=config, seed=seed,
                            color=np.vstack(color), texture=np.vstack(texture))
