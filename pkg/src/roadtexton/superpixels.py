"""Graph-based oversegmentation (Felzenszwalb & Huttenlocher).

Pixels are nodes of an 8-connected grid graph weighted by the Euclidean
distance between Gaussian-smoothed RGB values. Edges are visited in
ascending (weight, source, destination) order and two components merge when
the edge weight does not exceed either side's internal difference plus
``k / size``. A final pass over the same order absorbs components smaller
than ``min_size``.
"""
from __future__ import annotations

import io
from dataclasses import dataclass

import numba
import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import ImageTooSmall


@dataclass(frozen=True)
class SegParams:
    sigma: float = 0.5
    k: float = 80.0
    min_size: int = 80

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.k <= 0:
            raise ValueError("k must be > 0")
        if self.min_size < 1:
            raise ValueError("min_size must be >= 1")


@dataclass(frozen=True)
class SuperpixelMap:
    """Dense segment ids ``0 .. n_segments - 1`` for every pixel."""

    labels: np.ndarray  # (H, W) int64

    @property
    def n_segments(self):
        return int(self.labels.max()) + 1 if self.labels.size else 0

    @property
    def shape(self):
        return self.labels.shape

    def sizes(self):
        return np.bincount(self.labels.ravel(), minlength=self.n_segments)

    def pixel_lists(self):
        """Flat pixel indices of each segment, in raster order."""
        flat = self.labels.ravel()
        order = np.argsort(flat, kind="stable")
        return np.split(order, np.cumsum(self.sizes())[:-1])


def singleton_superpixels(height, width):
    """Every pixel its own segment."""
    return SuperpixelMap(np.arange(height * width, dtype=np.int64).reshape(height, width))


def region_superpixels(height, width):
    """The whole image as one segment."""
    return SuperpixelMap(np.zeros((height, width), dtype=np.int64))


@numba.njit(cache=True)
def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        nxt = parent[x]
        parent[x] = root
        x = nxt
    return root


@numba.njit(cache=True)
def _join(parent, rank, size, a, b):
    if rank[a] > rank[b]:
        parent[b] = a
        size[a] += size[b]
        return a
    parent[a] = b
    size[b] += size[a]
    if rank[a] == rank[b]:
        rank[b] += 1
    return b


@numba.njit(cache=True)
def _segment(n, src, dst, weight, k, min_size):
    parent = np.arange(n)
    rank = np.zeros(n, dtype=np.int64)
    size = np.ones(n, dtype=np.int64)
    threshold = np.full(n, k)
    for e in range(src.shape[0]):
        a = _find(parent, src[e])
        b = _find(parent, dst[e])
        if a != b and weight[e] <= threshold[a] and weight[e] <= threshold[b]:
            r = _join(parent, rank, size, a, b)
            threshold[r] = weight[e] + k / size[r]
    for e in range(src.shape[0]):
        a = _find(parent, src[e])
        b = _find(parent, dst[e])
        if a != b and (size[a] < min_size or size[b] < min_size):
            _join(parent, rank, size, a, b)
    out = np.empty(n, dtype=np.int64)
    for i in range(n):
        out[i] = _find(parent, i)
    return out


def _grid_edges(h, w):
    ids = np.arange(h * w).reshape(h, w)
    pairs = (
        (ids[:, :-1], ids[:, 1:]),        # right
        (ids[:-1, :], ids[1:, :]),        # down
        (ids[:-1, :-1], ids[1:, 1:]),     # down-right
        (ids[1:, :-1], ids[:-1, 1:]),     # up-right
    )
    src = np.concatenate([a.ravel() for a, _ in pairs])
    dst = np.concatenate([b.ravel() for _, b in pairs])
    return src, dst


def smooth(img, sigma):
    img = np.asarray(img, dtype=np.float64)
    if sigma <= 0:
        return img
    return ndimage.gaussian_filter(img, sigma=(sigma, sigma, 0), mode="nearest", truncate=4.0)


def segment_graph_based(img, params=None):
    """Oversegment an RGB image into superpixels of at least ``min_size`` pixels."""
    params = params or SegParams()
    img = np.asarray(img)
    h, w = img.shape[:2]
    if h * w < params.min_size:
        raise ImageTooSmall(f"{w}x{h} image is smaller than min_size={params.min_size}")
    flat = smooth(img, params.sigma).reshape(h * w, -1)
    src, dst = _grid_edges(h, w)
    weight = np.sqrt(((flat[src] - flat[dst]) ** 2).sum(axis=1))
    order = np.lexsort((dst, src, weight))
    roots = _segment(h * w, src[order], dst[order], weight[order], float(params.k), params.min_size)
    # dense ids numbered by first appearance in raster order
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return SuperpixelMap(rank[inverse].reshape(h, w))


def boundaries(sp):
    """Boolean mask of pixels whose right or lower neighbour lies in another segment."""
    lab = sp.labels
    edge = np.zeros(lab.shape, dtype=bool)
    edge[:, :-1] |= lab[:, :-1] != lab[:, 1:]
    edge[:-1, :] |= lab[:-1, :] != lab[1:, :]
    return edge


def boundary_overlay(img, sp, color=(255, 0, 0)):
    out = np.array(img, dtype=np.uint8, copy=True)
    out[boundaries(sp)] = color
    return out


def segment_ids_png(sp):
    """16-bit greyscale PNG of the segment ids."""
    if sp.n_segments > 65535:
        raise ValueError("too many segments for a 16-bit id image")
    buf = io.BytesIO()
    Image.fromarray(sp.labels.astype(np.uint16)).save(buf, format="PNG")
    return buf.getvalue()
