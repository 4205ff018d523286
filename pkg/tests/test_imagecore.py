import itertools
import logging

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image
from skimage import color as skcolor

import frozen
from lesionlab.errors import DataError, ParameterError
from lesionlab.imagecore import (
    COLOR_SPACES, ColorSpace, as_image, as_mask, convert, image_size, lab_to_rgb, load_image,
    load_mask, luv_to_rgb, rgb_to_lab, rgb_to_luv, save_image, save_mask, to_gray,
)

unit = st.floats(0.0, 1.0, allow_nan=False)
images = arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6), st.just(3)), elements=unit)


def grid9():
    v = np.linspace(0.0, 1.0, 9)
    return np.array(list(itertools.product(v, v, v)))


def test_six_color_spaces():
    assert len(ColorSpace) == 6
    assert [c.value for c in COLOR_SPACES] == ["RGB", "HSV", "YCbCr", "YIQ", "CIELuv", "CIELab"]


@given(images)
def test_rgb_is_identity(img):
    assert np.array_equal(convert(img, ColorSpace.RGB), img)


def test_white_to_hsv():
    assert convert(np.ones((1, 1, 3)), "HSV")[0, 0].tolist() == [0.0, 0.0, 1.0]


def test_red_to_yiq():
    np.testing.assert_allclose(convert(np.array([[1.0, 0.0, 0.0]]), "YIQ")[0], frozen.YIQ_RED, atol=1e-12)


def test_gray_examples():
    np.testing.assert_allclose(to_gray(np.array([[[0.0, 1.0, 0.0]]])), [[frozen.LUMA_GREEN]], atol=1e-12)
    assert np.all(to_gray(np.zeros((4, 5, 3))) == 0.0)


@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=unit))
def test_gray_of_gray_image(plane):
    img = np.repeat(plane[..., None], 3, axis=2)
    np.testing.assert_allclose(to_gray(img), plane, atol=1e-9)


@pytest.mark.parametrize("fwd, inv", [(rgb_to_lab, lab_to_rgb), (rgb_to_luv, luv_to_rgb)])
def test_cie_round_trip_grid(fwd, inv):
    rgb = grid9()
    assert np.max(np.abs(inv(fwd(rgb)) - rgb)) <= 1e-3


def test_against_skimage_on_grid():
    # independent implementation of the same standard definitions
    rgb = grid9().reshape(-1, 1, 3)
    np.testing.assert_allclose(convert(rgb, "CIELab"), skcolor.rgb2lab(rgb), atol=1e-3)
    np.testing.assert_allclose(convert(rgb, "CIELuv"), skcolor.rgb2luv(rgb), atol=1e-3)
    np.testing.assert_allclose(convert(rgb, "YCbCr"), skcolor.rgb2ycbcr(rgb) / 255.0, atol=1e-9)
    np.testing.assert_allclose(convert(rgb, "YIQ"), skcolor.rgb2yiq(rgb), atol=2e-3)
    hsv = convert(rgb, "HSV")
    ref = skcolor.rgb2hsv(rgb)
    np.testing.assert_allclose(hsv[..., 1:], ref[..., 1:], atol=1e-12)
    dh = np.abs(hsv[..., 0] - 360.0 * ref[..., 0])
    assert np.all(np.minimum(dh, 360.0 - dh) < 1e-9)


@given(images)
def test_hue_range_and_shapes(img):
    for space in COLOR_SPACES:
        assert convert(img, space).shape == img.shape
    h = convert(img, "HSV")[..., 0]
    assert np.all((h >= 0) & (h < 360))


def test_validation():
    with pytest.raises(ParameterError):
        as_image(np.full((2, 2, 3), 1.5))
    with pytest.raises(ParameterError):
        as_image(np.zeros((2, 2)))
    with pytest.raises(ParameterError):
        as_mask(np.array([[0, 2]]))
    with pytest.raises(ParameterError):
        as_mask(np.zeros((2, 2), bool), (3, 3))


def test_png_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, (7, 5, 3)) / 255.0
    save_image(tmp_path / "a.png", img)
    assert np.array_equal(load_image(tmp_path / "a.png"), img)
    assert image_size(tmp_path / "a.png") == (7, 5)
    mask = rng.random((7, 5)) > 0.5
    save_mask(tmp_path / "m.png", mask)
    assert np.array_equal(load_mask(tmp_path / "m.png"), mask)


def test_ppm_and_mask_threshold(tmp_path):
    data = np.arange(2 * 3 * 3, dtype=np.uint8).reshape(2, 3, 3) * 10
    Image.fromarray(data).save(tmp_path / "a.ppm")
    assert np.array_equal(load_image(tmp_path / "a.ppm"), data / 255.0)
    Image.fromarray(np.array([[127, 128]], dtype=np.uint8)).save(tmp_path / "m.png")
    assert load_mask(tmp_path / "m.png").tolist() == [[False, True]]


def test_alpha_stripped_with_warning(tmp_path, caplog):
    Image.fromarray(np.full((2, 2, 4), 200, np.uint8)).save(tmp_path / "a.png")
    with caplog.at_level(logging.WARNING):
        img = load_image(tmp_path / "a.png")
    assert img.shape == (2, 2, 3)
    assert "alpha" in caplog.text


def test_bad_files(tmp_path):
    (tmp_path / "x.png").write_bytes(b"not an image")
    with pytest.raises(DataError, match="x.png"):
        load_image(tmp_path / "x.png")
    Image.fromarray(np.zeros((2, 2), np.uint16)).save(tmp_path / "d.png")
    with pytest.raises(DataError):
        load_image(tmp_path / "d.png")
