"""Image I/O, resizing, sRGB -> CIELab conversion and label-map coding.

Images are plain numpy arrays: RGB images are ``uint8`` arrays of shape
``(height, width, 3)``, Lab images are ``float64`` of the same shape and
label maps are integer ``(height, width)`` arrays holding class indices or
``UNKNOWN``.
"""
from __future__ import annotations

import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DimensionMismatch, IndexOutOfPalette, UnknownColor

UNKNOWN = -1

# sRGB primaries, D65 white (IEC 61966-2-1)
_RGB_TO_XYZ = np.array([
    [0.4124564, 0.3575761, 0.1804375],
    [0.2126729, 0.7151522, 0.0721750],
    [0.0193339, 0.1191920, 0.9503041],
])
# white derived from the matrix so that r=g=b maps to exactly neutral a, b
_WHITE = _RGB_TO_XYZ.sum(axis=1)
_DELTA = 6.0 / 29.0


def rgb_to_lab(img):
    """Convert an 8-bit sRGB image (or ``(..., 3)`` array) to CIELab."""
    rgb = np.asarray(img, dtype=np.float64) / 255.0
    linear = np.where(rgb <= 0.04045, rgb / 12.92, ((rgb + 0.055) / 1.055) ** 2.4)
    xyz = linear @ _RGB_TO_XYZ.T / _WHITE
    f = np.where(xyz > _DELTA ** 3, np.cbrt(xyz), xyz / (3 * _DELTA ** 2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def _axis_weights(n_in, n_out):
    # half-pixel centre alignment, edge samples clamped
    pos = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
    pos = np.clip(pos, 0, n_in - 1)
    lo = np.floor(pos).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    return lo, hi, pos - lo


def resize_bilinear(img, width, height):
    """Bilinearly resample an RGB image to ``width`` x ``height``."""
    if width < 1 or height < 1:
        raise ValueError("target size must be at least 1x1")
    img = np.asarray(img)
    h, w = img.shape[:2]
    if (w, h) == (width, height):
        return img.copy()
    x0, x1, fx = _axis_weights(w, width)
    y0, y1, fy = _axis_weights(h, height)
    src = img.astype(np.float64)
    fx = fx[None, :, None]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bottom = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    fy = fy[:, None, None]
    out = top * (1 - fy) + bottom * fy
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def resize_nearest(labels, width, height):
    """Nearest-neighbour resampling, for label maps."""
    labels = np.asarray(labels)
    h, w = labels.shape[:2]
    if (w, h) == (width, height):
        return labels.copy()
    xs = np.minimum(((np.arange(width) + 0.5) * w / width).astype(np.intp), w - 1)
    ys = np.minimum(((np.arange(height) + 0.5) * h / height).astype(np.intp), h - 1)
    return labels[ys][:, xs]


def load_rgb(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def rgb_to_png_bytes(img):
    buf = io.BytesIO()
    Image.fromarray(np.asarray(img, dtype=np.uint8), "RGB").save(buf, format="PNG")
    return buf.getvalue()


def save_rgb(path, img):
    Path(path).write_bytes(rgb_to_png_bytes(img))


@dataclass(frozen=True)
class ClassPalette:
    """Ordered class names with display colours plus the reserved UNKNOWN colour."""

    names: tuple
    colors: tuple
    unknown_color: tuple = (0, 0, 0)

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "colors", tuple(tuple(int(v) for v in c) for c in self.colors))
        object.__setattr__(self, "unknown_color", tuple(int(v) for v in self.unknown_color))
        if len(self.names) != len(self.colors):
            raise ValueError("palette needs one colour per class")
        if len(set(self.names)) != len(self.names):
            raise ValueError("palette class names must be unique")
        if len(set(self.colors) | {self.unknown_color}) != len(self.colors) + 1:
            raise ValueError("palette colours must be unique and differ from UNKNOWN")

    def __len__(self):
        return len(self.names)

    def index(self, name):
        return self.names.index(name)

    def lut(self):
        """``(C + 1, 3)`` colour table; the last row is UNKNOWN."""
        return np.array(list(self.colors) + [self.unknown_color], dtype=np.uint8)

    @classmethod
    def from_json(cls, text):
        entries = json.loads(text)
        if not entries or str(entries[-1]["name"]).upper() != "UNKNOWN":
            raise ValueError("palette must end with an UNKNOWN entry")
        return cls(
            names=[e["name"] for e in entries[:-1]],
            colors=[e["rgb"] for e in entries[:-1]],
            unknown_color=entries[-1]["rgb"],
        )

    def to_json(self):
        entries = [{"name": n, "rgb": list(c)} for n, c in zip(self.names, self.colors)]
        entries.append({"name": "UNKNOWN", "rgb": list(self.unknown_color)})
        return json.dumps(entries, indent=2)

    @classmethod
    def load(cls, path):
        return cls.from_json(Path(path).read_text())


ROADSIDE_PALETTE = ClassPalette(
    names=("brown_grass", "green_grass", "road", "soil", "tree_leaf", "tree_stem", "sky"),
    colors=(
        (230, 200, 40), (40, 190, 40), (128, 128, 128), (150, 90, 40),
        (0, 100, 0), (110, 60, 20), (100, 160, 255),
    ),
    unknown_color=(0, 0, 0),
)


def decode_label_map(data, palette):
    """Decode label-image bytes (8-bit indexed or palette-RGB) to class indices.

    Indexed files store the palette position directly; the position just past
    the last class (``len(palette)``) means UNKNOWN.
    """
    with Image.open(io.BytesIO(data)) as im:
        if im.mode in ("P", "L"):
            idx = np.asarray(im, dtype=np.int64)
            if (idx > len(palette)).any():
                y, x = np.argwhere(idx > len(palette))[0]
                raise IndexOutOfPalette(f"pixel ({x}, {y}) has index {idx[y, x]}")
            return np.where(idx == len(palette), UNKNOWN, idx)
        rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)

    lut = palette.lut().astype(np.int64)
    keys = (lut[:, 0] << 16) | (lut[:, 1] << 8) | lut[:, 2]
    pix = rgb.astype(np.int64)
    pix_keys = (pix[..., 0] << 16) | (pix[..., 1] << 8) | pix[..., 2]
    order = np.argsort(keys)
    pos = np.searchsorted(keys[order], pix_keys)
    pos = np.minimum(pos, len(keys) - 1)
    found = keys[order][pos] == pix_keys
    if not found.all():
        y, x = np.argwhere(~found)[0]
        raise UnknownColor(int(x), int(y), rgb[y, x])
    labels = order[pos]
    return np.where(labels == len(palette), UNKNOWN, labels)


def encode_label_map(labels, palette, indexed=False):
    """Render a label map as PNG bytes using the palette colours.

    With ``indexed=True`` an 8-bit palette PNG is written whose indices equal
    the class indices (UNKNOWN stored as ``len(palette)``).
    """
    labels = np.asarray(labels)
    bad = (labels != UNKNOWN) & ((labels < 0) | (labels >= len(palette)))
    if bad.any():
        raise IndexOutOfPalette(f"label {labels[bad][0]} outside palette of {len(palette)}")
    idx = np.where(labels == UNKNOWN, len(palette), labels).astype(np.uint8)
    buf = io.BytesIO()
    if indexed:
        im = Image.fromarray(idx, "P")
        im.putpalette(palette.lut().ravel().tolist())
    else:
        im = Image.fromarray(palette.lut()[idx], "RGB")
    im.save(buf, format="PNG")
    return buf.getvalue()


def check_same_shape(a, b, what="images"):
    if np.shape(a)[:2] != np.shape(b)[:2]:
        raise DimensionMismatch(f"{what} differ in size: {np.shape(a)[:2]} vs {np.shape(b)[:2]}")
