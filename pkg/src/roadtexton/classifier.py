"""Texton mapping, per-superpixel occurrence counting and majority voting.

Every pixel is mapped to its nearest colour texton and nearest texture
texton over all classes. Per superpixel, the colour and texture hits of each
class are counted, mixed as ``color + w * texture`` and divided by the
superpixel size; the class with the largest value labels the whole
superpixel (lowest class index on ties).
"""
from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigMismatch, DimensionMismatch, EmptyRegion
from .features import extract_features
from .image import encode_label_map, resize_bilinear
from .superpixels import (
    SegParams, SuperpixelMap, boundaries, region_superpixels, segment_graph_based,
    singleton_superpixels,
)
from .textons import nearest

IMAGE_SIZE = (320, 240)


@dataclass(frozen=True)
class TextonAssignment:
    """Row of the nearest colour and texture texton for every pixel, ``(H, W)``.

    Rows index the class-major dictionary matrices: class = row // K,
    texton = row % K.
    """

    color: np.ndarray
    texture: np.ndarray
    k: int

    @property
    def shape(self):
        return self.color.shape

    @property
    def color_class(self):
        return self.color // self.k

    @property
    def texture_class(self):
        return self.texture // self.k


def map_to_textons(features, dictionary):
    if features.config.filter_size != dictionary.config.filter_size:
        raise ConfigMismatch(
            f"features use {features.config.filter_size}x{features.config.filter_size} filters, "
            f"dictionary was trained with {dictionary.config.filter_size}")
    h, w = features.shape
    color, _ = nearest(dictionary.metric, features.color.reshape(h * w, -1), dictionary.color)
    texture, _ = nearest(dictionary.metric, features.texture.reshape(h * w, -1), dictionary.texture)
    return TextonAssignment(color.reshape(h, w), texture.reshape(h, w), dictionary.k)


@dataclass(frozen=True)
class OccurrenceTable:
    """Per-superpixel texton hit counts, each ``(L, C, K)``."""

    color: np.ndarray
    texture: np.ndarray
    sizes: np.ndarray  # (L,) pixels per superpixel

    @property
    def color_by_class(self):
        return self.color.sum(axis=2)

    @property
    def texture_by_class(self):
        return self.texture.sum(axis=2)


def accumulate(sp, assignment, n_classes):
    if sp.shape != assignment.shape:
        raise DimensionMismatch(f"superpixels {sp.shape} vs assignment {assignment.shape}")
    n_seg, k = sp.n_segments, assignment.k
    cells = n_classes * k
    seg = sp.labels.ravel()

    def count(rows):
        flat = np.bincount(seg * cells + rows.ravel(), minlength=n_seg * cells)
        return flat.reshape(n_seg, n_classes, k)

    return OccurrenceTable(count(assignment.color), count(assignment.texture), sp.sizes())


def vote(color_by_class, texture_by_class, weight, sizes):
    """Mixed class probabilities ``(L, C)`` and the winning class per row.

    Probabilities are left unnormalised and sum to ``1 + weight``.
    """
    if weight < 0:
        raise ValueError("texture weight must be >= 0")
    mixed = np.asarray(color_by_class, dtype=np.float64) + weight * np.asarray(texture_by_class, dtype=np.float64)
    probs = mixed / np.asarray(sizes, dtype=np.float64)[:, None]
    return probs, np.argmax(probs, axis=1)


def mix_and_vote(table, weight):
    return vote(table.color_by_class, table.texture_by_class, weight, table.sizes)


@dataclass
class SegmentationResult:
    labels: np.ndarray          # (H, W) class per pixel
    probabilities: np.ndarray   # (L, C)
    segment_labels: np.ndarray  # (L,)
    superpixels: SuperpixelMap
    weight: float
    image: np.ndarray = None    # the (resized) input that was classified
    timings: dict = field(default_factory=dict)

    def probability_csv(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        n_classes = self.probabilities.shape[1]
        writer.writerow(["superpixel_id", "size"] + [f"p_{i}" for i in range(n_classes)] + ["label"])
        sizes = self.superpixels.sizes()
        for sid, (row, label) in enumerate(zip(self.probabilities, self.segment_labels)):
            writer.writerow([sid, int(sizes[sid])] + [repr(float(p)) for p in row] + [int(label)])
        return buf.getvalue()

    def label_png(self, palette, indexed=True):
        return encode_label_map(self.labels, palette, indexed=indexed)

    def overlay(self, palette, alpha=0.5):
        colors = palette.lut()[self.labels].astype(np.float64)
        base = np.asarray(self.image, dtype=np.float64)
        out = np.rint((1 - alpha) * base + alpha * colors).astype(np.uint8)
        out[boundaries(self.superpixels)] = (255, 255, 255)
        return out


def _prepare(img, size):
    img = np.asarray(img, dtype=np.uint8)
    if size is not None:
        img = resize_bilinear(img, *size)
    return img


def classify_image(img, dictionary, params=None, weight=1.0, size=IMAGE_SIZE, superpixels=None):
    """Resize, extract features, oversegment, map to textons and vote.

    ``superpixels`` bypasses the graph-based segmentation when given.
    ``size=None`` keeps the input resolution.
    """
    timings = {}
    t0 = time.perf_counter()
    img = _prepare(img, size)
    feats = extract_features(img, dictionary.config)
    t1 = time.perf_counter()
    timings["features"] = t1 - t0
    sp = superpixels if superpixels is not None else segment_graph_based(img, params or SegParams())
    if sp.shape != img.shape[:2]:
        raise DimensionMismatch(f"superpixel map {sp.shape} vs image {img.shape[:2]}")
    t2 = time.perf_counter()
    timings["superpixels"] = t2 - t1
    assignment = map_to_textons(feats, dictionary)
    table = accumulate(sp, assignment, dictionary.n_classes)
    probs, seg_labels = mix_and_vote(table, weight)
    timings["mapping"] = time.perf_counter() - t2
    return SegmentationResult(seg_labels[sp.labels], probs, seg_labels, sp, weight, img, timings)


def classify_pixelwise(img, dictionary, weight=1.0, size=IMAGE_SIZE):
    """Per-pixel decision: one colour vote plus ``weight`` texture vote."""
    timings = {}
    t0 = time.perf_counter()
    img = _prepare(img, size)
    feats = extract_features(img, dictionary.config)
    t1 = time.perf_counter()
    timings["features"] = t1 - t0
    a = map_to_textons(feats, dictionary)
    h, w = a.shape
    probs = np.zeros((h * w, dictionary.n_classes))
    rows = np.arange(h * w)
    probs[rows, a.color_class.ravel()] += 1.0
    probs[rows, a.texture_class.ravel()] += weight
    labels = np.argmax(probs, axis=1)
    timings["mapping"] = time.perf_counter() - t1
    return SegmentationResult(labels.reshape(h, w), probs, labels, singleton_superpixels(h, w),
                              weight, img, timings)


def classify_features(features, dictionary, weight=1.0):
    """Label a whole feature plane as one superpixel."""
    h, w = features.shape
    if h * w == 0:
        raise EmptyRegion("region has no pixels")
    a = map_to_textons(features, dictionary)
    table = accumulate(region_superpixels(h, w), a, dictionary.n_classes)
    probs, labels = mix_and_vote(table, weight)
    return int(labels[0]), probs[0]


def classify_region(region, dictionary, weight=1.0):
    """Label a cropped region treated as a single superpixel (no resizing)."""
    region = np.asarray(region)
    if region.size == 0:
        raise EmptyRegion("region has no pixels")
    return classify_features(extract_features(region, dictionary.config), dictionary, weight)
