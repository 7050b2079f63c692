"""Synthetic textured materials for benchmarks and tests.

Each material is a base colour whose brightness is modulated by a sinusoid
of a material-specific period, plus mild Gaussian noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Material:
    name: str
    color: tuple
    period: float  # pixels per sinusoid cycle
    amplitude: float = 25.0
    noise: float = 14.0


MATERIALS = (
    Material("brown_grass", (190, 160, 70), 3.0),
    Material("green_grass", (70, 160, 60), 4.0),
    Material("road", (120, 120, 125), 16.0),
    Material("soil", (150, 100, 60), 6.0),
    Material("tree_leaf", (40, 90, 40), 5.0),
    Material("tree_stem", (90, 60, 40), 9.0),
    Material("sky", (140, 180, 235), 24.0),
)


def render(material, height, width, rng, angle=None):
    """``(height, width, 3)`` uint8 patch of ``material`` with random phase."""
    if angle is None:
        angle = rng.uniform(0, np.pi)
    y, x = np.mgrid[0:height, 0:width].astype(np.float64)
    t = x * np.cos(angle) + y * np.sin(angle)
    wave = material.amplitude * np.sin(2 * np.pi * t / material.period + rng.uniform(0, 2 * np.pi))
    img = np.asarray(material.color, dtype=np.float64) + wave[..., None]
    img += rng.normal(0, material.noise, img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def make_crops(n_per_class, size=64, seed=0, materials=MATERIALS):
    """``n_per_class`` crops of each material, grouped by class."""
    rng = np.random.default_rng(seed)
    return [[render(m, size, size, rng) for _ in range(n_per_class)] for m in materials]


def make_mosaic(rng, width=320, height=240, tile=80, materials=MATERIALS):
    """Grid of randomly chosen material tiles and its ground-truth label map."""
    img = np.empty((height, width, 3), dtype=np.uint8)
    gt = np.empty((height, width), dtype=np.int64)
    for top in range(0, height, tile):
        for left in range(0, width, tile):
            h, w = min(tile, height - top), min(tile, width - left)
            c = int(rng.integers(len(materials)))
            img[top:top + h, left:left + w] = render(materials[c], h, w, rng)
            gt[top:top + h, left:left + w] = c
    return img, gt


def add_impulse_noise(img, fraction, rng):
    """Replace ``fraction`` of the pixels with uniformly random colours."""
    out = np.array(img, copy=True)
    h, w = out.shape[:2]
    idx = rng.choice(h * w, size=int(round(fraction * h * w)), replace=False)
    out.reshape(h * w, 3)[idx] = rng.integers(0, 256, size=(len(idx), 3), dtype=np.uint8)
    return out
