"""Raster validation, PNG/PPM IO and color-space conversions.

Images are plain numpy arrays:

* RGB image: ``float64`` array of shape ``(H, W, 3)`` with values in [0, 1]
* gray image: ``float64`` array of shape ``(H, W)`` with values in [0, 1]
* mask: ``bool`` array of shape ``(H, W)``

8-bit files are decoded as ``v / 255`` at load time and all further
arithmetic is double precision.
"""

from __future__ import annotations

import enum
import logging
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from .errors import DataError, ParameterError

logger = logging.getLogger(__name__)


class ColorSpace(str, enum.Enum):
    RGB = "RGB"
    HSV = "HSV"
    YCBCR = "YCbCr"
    YIQ = "YIQ"  # the NTSC transmission space
    LUV = "CIELuv"
    LAB = "CIELab"


#: order used everywhere a per-space block is laid out
COLOR_SPACES = (
    ColorSpace.RGB,
    ColorSpace.HSV,
    ColorSpace.YCBCR,
    ColorSpace.YIQ,
    ColorSpace.LUV,
    ColorSpace.LAB,
)

LUMA_WEIGHTS = np.array([0.299, 0.587, 0.114])

# ITU-R BT.601 studio-swing YCbCr, expressed for inputs in [0, 1] and
# rescaled back into [0, 1] (Y in [16, 235]/255, Cb/Cr in [16, 240]/255).
_YCBCR_MATRIX = np.array([
    [65.481, 128.553, 24.966],
    [-37.797, -74.203, 112.0],
    [112.0, -93.786, -18.214],
]) / 255.0
_YCBCR_OFFSET = np.array([16.0, 128.0, 128.0]) / 255.0

_YIQ_MATRIX = np.array([
    [0.299, 0.587, 0.114],
    [0.596, -0.274, -0.322],
    [0.211, -0.523, 0.312],
])

# linear sRGB -> CIE XYZ, D65
_XYZ_MATRIX = np.array([
    [0.412453, 0.357580, 0.180423],
    [0.212671, 0.715160, 0.072169],
    [0.019334, 0.119193, 0.950227],
])
_RGB_FROM_XYZ = np.linalg.inv(_XYZ_MATRIX)
WHITE_D65 = np.array([0.95047, 1.0, 1.08883])

_EPS_LAB = (6.0 / 29.0) ** 3
_KAPPA = (29.0 / 3.0) ** 3


# ---------------------------------------------------------------------------
# validation


def as_image(img) -> np.ndarray:
    """Return ``img`` as a validated float64 ``(H, W, 3)`` array."""
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ParameterError(f"expected an (H, W, 3) image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ParameterError("image must be at least 1x1")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ParameterError("image intensities must lie in [0, 1]")
    return arr


def as_gray(gray) -> np.ndarray:
    arr = np.asarray(gray, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ParameterError(f"expected an (H, W) gray image, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)) or arr.min() < 0.0 or arr.max() > 1.0:
        raise ParameterError("gray intensities must lie in [0, 1]")
    return arr


def as_mask(mask, shape: tuple[int, int] | None = None) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise ParameterError(f"expected an (H, W) mask, got shape {arr.shape}")
    if arr.dtype != bool:
        if not np.all((arr == 0) | (arr == 1)):
            raise ParameterError("mask values must be binary {0, 1}")
        arr = arr.astype(bool)
    if shape is not None and arr.shape != tuple(shape):
        raise ParameterError(f"mask shape {arr.shape} does not match {tuple(shape)}")
    return arr


# ---------------------------------------------------------------------------
# IO


def load_image(path) -> np.ndarray:
    """Decode an 8-bit PNG or binary PPM into an RGB float image."""
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I", "F"):
                raise DataError(f"{path}: 16-bit and float images are not supported")
            if mode in ("RGBA", "LA", "PA") or (mode == "P" and "transparency" in im.info):
                logger.warning("%s: alpha channel stripped", path)
            rgb = im.convert("RGB")
            data = np.asarray(rgb, dtype=np.uint8)
    except DataError:
        raise
    except Exception as exc:  # Pillow raises a zoo of types
        raise DataError(f"{path}: cannot decode image ({exc})") from exc
    return data.astype(np.float64) / 255.0


def load_mask(path) -> np.ndarray:
    """Load a single-channel mask PNG; pixel values >= 128 mark lesion."""
    path = Path(path)
    try:
        with PILImage.open(path) as im:
            im.load()
            data = np.asarray(im.convert("L"), dtype=np.uint8)
    except Exception as exc:
        raise DataError(f"{path}: cannot decode mask ({exc})") from exc
    return data >= 128


def image_size(path) -> tuple[int, int]:
    """Return ``(height, width)`` without decoding pixel data."""
    try:
        with PILImage.open(path) as im:
            w, h = im.size
    except Exception as exc:
        raise DataError(f"{path}: cannot decode image ({exc})") from exc
    return h, w


def to_uint8(img: np.ndarray) -> np.ndarray:
    return np.clip(np.floor(np.asarray(img) * 255.0 + 0.5), 0, 255).astype(np.uint8)


def save_image(path, img: np.ndarray) -> None:
    PILImage.fromarray(to_uint8(as_image(img))).save(path, format="PNG")


def save_mask(path, mask: np.ndarray) -> None:
    data = np.where(as_mask(mask), 255, 0).astype(np.uint8)
    PILImage.fromarray(data).save(path, format="PNG")


# ---------------------------------------------------------------------------
# color


def to_gray(img: np.ndarray) -> np.ndarray:
    """BT.601 luma, clamped to [0, 1]."""
    img = as_image(img)
    return np.clip(img @ LUMA_WEIGHTS, 0.0, 1.0)


def _srgb_to_linear(c):
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c):
    c = np.clip(c, 0.0, None)
    return np.where(c <= 0.0031308, 12.92 * c, 1.055 * c ** (1.0 / 2.4) - 0.055)


def rgb_to_xyz(rgb):
    return _srgb_to_linear(rgb) @ _XYZ_MATRIX.T


def xyz_to_rgb(xyz):
    return _linear_to_srgb(xyz @ _RGB_FROM_XYZ.T)


def _lab_f(t):
    return np.where(t > _EPS_LAB, np.cbrt(t), t / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0)


def _lab_f_inv(t):
    return np.where(t > 6.0 / 29.0, t ** 3, 3.0 * (6.0 / 29.0) ** 2 * (t - 4.0 / 29.0))


def rgb_to_lab(rgb):
    xyz = rgb_to_xyz(rgb) / WHITE_D65
    fx, fy, fz = (_lab_f(xyz[..., k]) for k in range(3))
    return np.stack([116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)], axis=-1)


def lab_to_rgb(lab):
    L, a, b = lab[..., 0], lab[..., 1], lab[..., 2]
    fy = (L + 16.0) / 116.0
    fx = fy + a / 500.0
    fz = fy - b / 200.0
    xyz = np.stack([_lab_f_inv(fx), _lab_f_inv(fy), _lab_f_inv(fz)], axis=-1) * WHITE_D65
    return xyz_to_rgb(xyz)


def _uv_prime(xyz):
    X, Y, Z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    denom = X + 15.0 * Y + 3.0 * Z
    safe = np.where(denom > 0, denom, 1.0)
    u = np.where(denom > 0, 4.0 * X / safe, 0.0)
    v = np.where(denom > 0, 9.0 * Y / safe, 0.0)
    return u, v


_UN, _VN = _uv_prime(WHITE_D65)


def rgb_to_luv(rgb):
    xyz = rgb_to_xyz(rgb)
    y = xyz[..., 1] / WHITE_D65[1]
    L = np.where(y > _EPS_LAB, 116.0 * np.cbrt(y) - 16.0, _KAPPA * y)
    u_p, v_p = _uv_prime(xyz)
    black = (xyz[..., 0] + 15.0 * xyz[..., 1] + 3.0 * xyz[..., 2]) <= 0
    u = np.where(black, 0.0, 13.0 * L * (u_p - _UN))
    v = np.where(black, 0.0, 13.0 * L * (v_p - _VN))
    return np.stack([L, u, v], axis=-1)


def luv_to_rgb(luv):
    L, u, v = luv[..., 0], luv[..., 1], luv[..., 2]
    Y = np.where(L > 8.0, ((L + 16.0) / 116.0) ** 3, L / _KAPPA) * WHITE_D65[1]
    safe_L = np.where(L > 0, L, 1.0)
    u_p = np.where(L > 0, u / (13.0 * safe_L) + _UN, _UN)
    v_p = np.where(L > 0, v / (13.0 * safe_L) + _VN, _VN)
    safe_v = np.where(v_p != 0, v_p, 1.0)
    X = np.where(v_p != 0, Y * 9.0 * u_p / (4.0 * safe_v), 0.0)
    Z = np.where(v_p != 0, Y * (12.0 - 3.0 * u_p - 20.0 * v_p) / (4.0 * safe_v), 0.0)
    return xyz_to_rgb(np.stack([X, Y, Z], axis=-1))


def rgb_to_hsv(rgb):
    """HSV with hue in degrees [0, 360); achromatic pixels get hue 0."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    v = rgb.max(axis=-1)
    c = v - rgb.min(axis=-1)
    s = np.where(v > 0, c / np.where(v > 0, v, 1.0), 0.0)
    cs = np.where(c > 0, c, 1.0)
    h = np.where(
        v == r,
        np.mod((g - b) / cs, 6.0),
        np.where(v == g, (b - r) / cs + 2.0, (r - g) / cs + 4.0),
    )
    h = np.where(c > 0, 60.0 * h, 0.0)
    h = np.where(h >= 360.0, h - 360.0, h)
    return np.stack([h, s, v], axis=-1)


def convert(img: np.ndarray, target: ColorSpace | str) -> np.ndarray:
    """Convert an RGB image (or an ``(N, 3)`` pixel list) to ``target``.

    Returns an array of the same shape with the three target channels in
    the last axis. RGB is the identity and returns the input unchanged.
    """
    target = ColorSpace(target)
    rgb = np.asarray(img, dtype=np.float64)
    if rgb.shape[-1] != 3:
        raise ParameterError(f"expected 3 channels in the last axis, got {rgb.shape}")
    if target is ColorSpace.RGB:
        return rgb
    if target is ColorSpace.HSV:
        return rgb_to_hsv(rgb)
    if target is ColorSpace.YCBCR:
        return rgb @ _YCBCR_MATRIX.T + _YCBCR_OFFSET
    if target is ColorSpace.YIQ:
        return rgb @ _YIQ_MATRIX.T
    if target is ColorSpace.LUV:
        return rgb_to_luv(rgb)
    return rgb_to_lab(rgb)
