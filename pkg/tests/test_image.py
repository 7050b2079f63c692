import io

import numpy as np
import pytest
from hypothesis import given, strategies as st
from PIL import Image

from roadtexton.errors import IndexOutOfPalette, UnknownColor
from roadtexton.image import (
    ROADSIDE_PALETTE, UNKNOWN, ClassPalette, decode_label_map, encode_label_map,
    resize_bilinear, resize_nearest, rgb_to_lab,
)

# reference values from an independent CIE 1976 implementation (skimage.color.rgb2lab)
RED_LAB = (53.24058794, 80.09230823, 67.20275104)


def test_black_is_origin():
    np.testing.assert_allclose(rgb_to_lab([0, 0, 0]), [0, 0, 0], atol=1e-6)


def test_white_is_reference_white():
    lab = rgb_to_lab([255, 255, 255])
    assert lab[0] == pytest.approx(100, abs=1e-3)
    assert abs(lab[1]) < 1e-3 and abs(lab[2]) < 1e-3


def test_pure_red():
    np.testing.assert_allclose(rgb_to_lab([255, 0, 0]), RED_LAB, atol=0.05)


def test_gray_ramp_neutral_and_monotone():
    grays = np.repeat(np.arange(256)[:, None], 3, axis=1)
    lab = rgb_to_lab(grays)
    assert np.abs(lab[:, 1:]).max() <= 0.01
    assert (np.diff(lab[:, 0]) >= 0).all()
    assert lab[:, 0].min() >= 0 and lab[:, 0].max() <= 100 + 1e-9


@given(st.tuples(*[st.integers(0, 255)] * 3))
def test_lab_deterministic_and_bounded(rgb):
    a, b = rgb_to_lab(rgb), rgb_to_lab(np.array(rgb))
    assert np.array_equal(a, b)
    assert 0 <= a[0] <= 100 + 1e-9
    assert -128 <= a[1] <= 128 and -128 <= a[2] <= 128


def test_resize_identity():
    img = np.random.default_rng(0).integers(0, 256, (240, 320, 3), dtype=np.uint8)
    assert np.array_equal(resize_bilinear(img, 320, 240), img)


def test_resize_constant():
    img = np.full((480, 640, 3), (12, 200, 99), dtype=np.uint8)
    out = resize_bilinear(img, 320, 240)
    assert out.shape == (240, 320, 3)
    assert (out == (12, 200, 99)).all()


def test_resize_upscale_two_pixels():
    # sample centres map to source x = 0 (clamped), 0.25, 0.75, 1 (clamped)
    # -> 0, 63.75, 191.25, 255; the two middle samples average to 127.5
    img = np.array([[[0, 0, 0], [255, 255, 255]]], dtype=np.uint8)
    out = resize_bilinear(img, 4, 1)[0, :, 0].astype(int)
    assert out.tolist() == [0, 64, 191, 255]
    assert abs((out[1] + out[2]) / 2 - 127) <= 1


def test_resize_nearest_keeps_labels():
    lab = np.array([[0, 1], [2, UNKNOWN]])
    out = resize_nearest(lab, 4, 4)
    assert set(np.unique(out)) == {0, 1, 2, UNKNOWN}
    assert out[0, 0] == 0 and out[3, 3] == UNKNOWN


def _png(arr, mode):
    buf = io.BytesIO()
    Image.fromarray(arr, mode).save(buf, format="PNG")
    return buf.getvalue()


def test_decode_indexed_zeros():
    data = _png(np.zeros((5, 6), dtype=np.uint8), "L")
    out = decode_label_map(data, ROADSIDE_PALETTE)
    assert out.shape == (5, 6) and (out == 0).all()


def test_decode_rgb_single_class():
    arr = np.full((4, 4, 3), ROADSIDE_PALETTE.colors[3], dtype=np.uint8)
    assert (decode_label_map(_png(arr, "RGB"), ROADSIDE_PALETTE) == 3).all()


def test_decode_rgb_unknown_color_names_pixel():
    arr = np.full((4, 4, 3), ROADSIDE_PALETTE.colors[0], dtype=np.uint8)
    arr[2, 1] = (1, 2, 3)
    with pytest.raises(UnknownColor) as info:
        decode_label_map(_png(arr, "RGB"), ROADSIDE_PALETTE)
    assert (info.value.x, info.value.y, info.value.rgb) == (1, 2, (1, 2, 3))


def test_decode_unknown_color_maps_to_sentinel():
    arr = np.full((2, 2, 3), ROADSIDE_PALETTE.unknown_color, dtype=np.uint8)
    assert (decode_label_map(_png(arr, "RGB"), ROADSIDE_PALETTE) == UNKNOWN).all()


def test_encode_single_class():
    data = encode_label_map(np.zeros((3, 3), dtype=int), ROADSIDE_PALETTE)
    img = np.asarray(Image.open(io.BytesIO(data)).convert("RGB"))
    assert (img == ROADSIDE_PALETTE.colors[0]).all()


def test_encode_unknown_uses_reserved_color():
    lab = np.array([[0, UNKNOWN]])
    img = np.asarray(Image.open(io.BytesIO(encode_label_map(lab, ROADSIDE_PALETTE))).convert("RGB"))
    assert tuple(img[0, 1]) == ROADSIDE_PALETTE.unknown_color


def test_encode_out_of_palette():
    with pytest.raises(IndexOutOfPalette):
        encode_label_map(np.array([[7]]), ROADSIDE_PALETTE)


@pytest.mark.parametrize("indexed", [False, True])
def test_round_trip_random(indexed):
    rng = np.random.default_rng(1)
    lab = rng.integers(-1, 7, (16, 16))
    out = decode_label_map(encode_label_map(lab, ROADSIDE_PALETTE, indexed=indexed), ROADSIDE_PALETTE)
    assert np.array_equal(out, lab)


def test_indexed_file_round_trip():
    arr = np.random.default_rng(2).integers(0, 8, (9, 7)).astype(np.uint8)
    data = _png(arr, "L")
    labels = decode_label_map(data, ROADSIDE_PALETTE)
    again = decode_label_map(encode_label_map(labels, ROADSIDE_PALETTE, indexed=True), ROADSIDE_PALETTE)
    assert np.array_equal(again, labels)
    assert np.array_equal(np.where(labels == UNKNOWN, 7, labels), arr)


def test_palette_json_round_trip():
    again = ClassPalette.from_json(ROADSIDE_PALETTE.to_json())
    assert again == ROADSIDE_PALETTE


def test_palette_requires_unknown_last():
    with pytest.raises(ValueError):
        ClassPalette.from_json('[{"name": "a", "rgb": [1, 2, 3]}]')


def test_palette_rejects_duplicate_colors():
    with pytest.raises(ValueError):
        ClassPalette(("a", "b"), ((1, 1, 1), (1, 1, 1)))
