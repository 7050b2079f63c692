"""Per-pixel colour and filter-bank texture features.

Colour: <R, G, B, L, a, b> scaled to [0, 1].
Texture: 17 filter responses on the scaled Lab channels,
Gaussians (sigma 1, 2, 4) on L, a and b, Laplacians of Gaussian
(sigma 1, 2, 4, 8) on L and x/y derivatives of Gaussian (sigma 2, 4) on L.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import DimensionMismatch, ImageSmallerThanKernel, InvalidWindowSize
from .image import check_same_shape, rgb_to_lab

WINDOW_SIZES = (5, 7, 9, 11, 13, 15)
DEFAULT_WINDOW = 7

# channel -> (offset, scale): normalized = (value + offset) / scale
NORMALIZATION = {
    "R": (0.0, 255.0), "G": (0.0, 255.0), "B": (0.0, 255.0),
    "L": (0.0, 100.0), "a": (128.0, 256.0), "b": (128.0, 256.0),
}

# (channel, kind, sigma) in feature-vector order
FILTER_LAYOUT = (
    ("L", "gauss", 1), ("L", "gauss", 2), ("L", "gauss", 4),
    ("a", "gauss", 1), ("a", "gauss", 2), ("a", "gauss", 4),
    ("b", "gauss", 1), ("b", "gauss", 2), ("b", "gauss", 4),
    ("L", "log", 1), ("L", "log", 2), ("L", "log", 4), ("L", "log", 8),
    ("L", "dog_x", 2), ("L", "dog_x", 4),
    ("L", "dog_y", 2), ("L", "dog_y", 4),
)
COLOR_DIM = 6
TEXTURE_DIM = len(FILTER_LAYOUT)


@dataclass(frozen=True)
class FeatureConfig:
    filter_size: int = DEFAULT_WINDOW
    normalization: dict = field(default_factory=lambda: {k: list(v) for k, v in NORMALIZATION.items()})

    def __post_init__(self):
        if self.filter_size not in WINDOW_SIZES:
            raise InvalidWindowSize(f"filter size must be one of {WINDOW_SIZES}, got {self.filter_size}")

    def __hash__(self):
        return hash(self.filter_size)


@dataclass(frozen=True)
class FilterBank:
    size: int
    kernels: np.ndarray  # (17, size, size)
    layout: tuple = FILTER_LAYOUT

    def __len__(self):
        return len(self.kernels)


def _zero_sum_unit_l1(k):
    k = k - k.mean()
    return k / np.abs(k).sum()


def build_filter_bank(size=DEFAULT_WINDOW):
    """Sample the 17 kernels on a ``size`` x ``size`` grid.

    Every sigma shares the same window, so large sigmas are truncated.
    Gaussians are rescaled to sum to 1; LoG and DoG kernels are shifted to
    zero sum and scaled to unit L1 norm. ``dog_x`` is dG/dx with x growing to
    the right (columns), ``dog_y`` is dG/dy with y growing downward (rows).
    """
    if size not in WINDOW_SIZES:
        raise InvalidWindowSize(f"window size must be odd and within [5, 15], got {size}")
    r = np.arange(size, dtype=np.float64) - size // 2
    x, y = np.meshgrid(r, r)  # x varies along columns
    rr = x * x + y * y
    kernels = []
    for _, kind, sigma in FILTER_LAYOUT:
        var = float(sigma * sigma)
        g = np.exp(-rr / (2 * var)) / (2 * np.pi * var)
        if kind == "gauss":
            kernels.append(g / g.sum())
        elif kind == "log":
            kernels.append(_zero_sum_unit_l1((rr - 2 * var) / (var * var) * g))
        elif kind == "dog_x":
            kernels.append(_zero_sum_unit_l1(-x / var * g))
        else:
            kernels.append(_zero_sum_unit_l1(-y / var * g))
    return FilterBank(size=size, kernels=np.stack(kernels))


def normalize_channels(rgb, lab):
    """Stack RGB and Lab into an ``(H, W, 6)`` array scaled to [0, 1]."""
    check_same_shape(rgb, lab)
    out = np.empty(np.shape(rgb)[:2] + (6,))
    rgb = np.asarray(rgb, dtype=np.float64)
    lab = np.asarray(lab, dtype=np.float64)
    for i, ch in enumerate("RGB"):
        off, scale = NORMALIZATION[ch]
        out[..., i] = (rgb[..., i] + off) / scale
    for i, ch in enumerate("Lab"):
        off, scale = NORMALIZATION[ch]
        out[..., 3 + i] = (lab[..., i] + off) / scale
    return out


def extract_color_features(rgb, lab):
    return np.clip(normalize_channels(rgb, lab), 0.0, 1.0)


def normalized_lab(lab):
    lab = np.asarray(lab, dtype=np.float64)
    out = np.empty_like(lab)
    for i, ch in enumerate("Lab"):
        off, scale = NORMALIZATION[ch]
        out[..., i] = (lab[..., i] + off) / scale
    return out


def extract_texture_features(lab, bank):
    """Correlate the scaled Lab channels with each kernel (replicate borders)."""
    h, w = np.shape(lab)[:2]
    if h < bank.size or w < bank.size:
        raise ImageSmallerThanKernel(f"{w}x{h} image is smaller than the {bank.size}x{bank.size} filters")
    chans = normalized_lab(lab)
    out = np.empty((h, w, len(bank)))
    for i, ((ch, _, _), k) in enumerate(zip(bank.layout, bank.kernels)):
        out[..., i] = ndimage.correlate(chans[..., "Lab".index(ch)], k, mode="nearest")
    return out


@dataclass(frozen=True)
class PixelFeatures:
    """Colour ``(H, W, 6)`` and texture ``(H, W, 17)`` planes of one image."""

    color: np.ndarray
    texture: np.ndarray
    config: FeatureConfig

    @property
    def shape(self):
        return self.color.shape[:2]


_BANKS = {}


def filter_bank(size):
    if size not in _BANKS:
        _BANKS[size] = build_filter_bank(size)
    return _BANKS[size]


def extract_features(rgb, config=None):
    config = config or FeatureConfig()
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DimensionMismatch(f"expected an (H, W, 3) image, got shape {rgb.shape}")
    lab = rgb_to_lab(rgb)
    return PixelFeatures(
        color=extract_color_features(rgb, lab),
        texture=extract_texture_features(lab, filter_bank(config.filter_size)),
        config=config,
    )
