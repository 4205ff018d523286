"""Lesion descriptors: color moments, GLCM/Haralick texture and a joint RGB histogram.

Feature-vector layout (4182 values):

* ``[0, 72)`` color moments. Space-major over ``COLOR_SPACES``
  (RGB, HSV, YCbCr, YIQ, CIELuv, CIELab), then channel, then moment
  (mean, std, skewness, variance).
* ``[72, 86)`` Haralick f1..f14 averaged over 0, 45, 90 and 135 degrees.
* ``[86, 4182)`` 16x16x16 RGB histogram as proportions, index
  ``256*bR + 16*bG + bB``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import EmptyRegionError, NoPairsError, ParameterError
from .imagecore import COLOR_SPACES, as_gray, as_image, as_mask, convert, to_gray

N_COLOR = 72
N_TEXTURE = 14
N_HIST = 4096
N_FEATURES = N_COLOR + N_TEXTURE + N_HIST
BLOCKS = {
    "color": (0, N_COLOR),
    "texture": (N_COLOR, N_COLOR + N_TEXTURE),
    "histogram": (N_COLOR + N_TEXTURE, N_FEATURES),
}

MOMENT_NAMES = ("mean", "std", "skew", "var")
HARALICK_NAMES = (
    "asm", "contrast", "correlation", "sum_of_squares", "idm", "sum_average",
    "sum_variance", "sum_entropy", "entropy", "difference_variance",
    "difference_entropy", "imc1", "imc2", "mcc",
)
ORIENTATIONS = (0, 45, 90, 135)

DEFAULT_LEVELS = 32
DEFAULT_DISTANCE = 1
HIST_BINS = 16


def feature_names() -> list[str]:
    names = []
    for space in COLOR_SPACES:
        for ch in range(3):
            names += [f"{space.value}.c{ch}.{m}" for m in MOMENT_NAMES]
    names += [f"glcm.{n}" for n in HARALICK_NAMES]
    names += [f"hist.{i}" for i in range(N_HIST)]
    return names


# ---------------------------------------------------------------------------
# color moments


def _exact_third_moment(p: np.ndarray) -> float:
    """Third central moment of float64 values, correctly rounded, via big integers."""
    frac, exp = np.frexp(p)
    mant = (frac * 2.0 ** 53).astype(np.int64)
    exp = exp.astype(np.int64) - 53
    k = int(exp[mant != 0].min())
    ints = [int(m) << int(e - k) if m else 0 for m, e in zip(mant, exp)]
    n = len(ints)
    s1 = sum(ints)
    s2 = sum(x * x for x in ints)
    s3 = sum(x * x * x for x in ints)
    num = n * n * s3 - 3 * n * s1 * s2 + 2 * s1 ** 3
    return float(Fraction(num, n ** 3) * Fraction(2) ** (3 * k))


def channel_moments(values: np.ndarray, skewness: str = "cbrt") -> np.ndarray:
    """Mean, std, skewness and variance of one channel.

    ``skewness="cbrt"`` is the real cube root of the third central moment;
    ``"standard"`` is the third standardized moment (0 for a flat channel).
    """
    p = np.asarray(values, dtype=np.float64).ravel()
    if p.size == 0:
        raise EmptyRegionError("no pixels in region")
    if skewness not in ("cbrt", "standard"):
        raise ParameterError(f"unknown skewness definition {skewness!r}")
    if p.min() == p.max():
        # a summed mean can miss the constant by an ulp; flat means no spread
        return np.array([p[0], 0.0, 0.0, 0.0])
    mu = p.mean()
    dev = p - mu
    var = np.mean(dev * dev)
    m3 = np.mean(dev * dev * dev)
    if skewness == "cbrt":
        # the cube root blows up rounding noise near zero; bound it, recompute exactly if needed
        slack = np.finfo(float).eps * (8 * math.log2(p.size + 1) * np.mean(np.abs(dev) ** 3)
                                       + 4 * var * np.abs(p).max())
        if 3.0 * abs(m3) ** (2.0 / 3.0) < 1e12 * slack:
            m3 = _exact_third_moment(p)
        skew = np.cbrt(m3)
    else:
        skew = m3 / var ** 1.5 if var > 0 else 0.0
    return np.array([mu, math.sqrt(var), skew, var])


def color_moments(pixels: np.ndarray, space="RGB", skewness: str = "cbrt") -> np.ndarray:
    """12 moments (3 channels x mean/std/skew/var) of ``(N, 3)`` RGB pixels in ``space``."""
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    if pixels.shape[0] == 0:
        raise EmptyRegionError("no pixels in region")
    planes = convert(pixels, space)
    return np.concatenate([channel_moments(planes[:, c], skewness) for c in range(3)])


def all_color_moments(pixels: np.ndarray, skewness: str = "cbrt") -> np.ndarray:
    return np.concatenate([color_moments(pixels, s, skewness) for s in COLOR_SPACES])


# ---------------------------------------------------------------------------
# co-occurrence


@dataclass
class GlcmMatrix:
    levels: int
    distance: int
    angle: int
    entries: np.ndarray


def quantize(gray: np.ndarray, levels: int) -> np.ndarray:
    return np.minimum(np.floor(np.asarray(gray) * levels), levels - 1).astype(np.intp)


def offset(angle: int, distance: int) -> tuple[int, int]:
    """Row/column displacement for ``angle`` degrees (rows grow downwards)."""
    d = distance
    table = {0: (0, d), 45: (-d, d), 90: (-d, 0), 135: (-d, -d)}
    if angle not in table:
        raise ParameterError(f"angle must be one of {ORIENTATIONS}, got {angle}")
    return table[angle]


def glcm_counts(levels_img: np.ndarray, mask: np.ndarray, levels: int,
                distance: int, angle: int) -> np.ndarray:
    """Raw ordered-pair counts ``C[i, j]`` for pairs (p, p + offset) inside ``mask``."""
    dy, dx = offset(angle, distance)
    h, w = levels_img.shape
    # source rows/cols such that the target stays inside the image
    ys = slice(max(0, -dy), min(h, h - dy))
    xs = slice(max(0, -dx), min(w, w - dx))
    yt = slice(ys.start + dy, ys.stop + dy)
    xt = slice(xs.start + dx, xs.stop + dx)
    both = mask[ys, xs] & mask[yt, xt]
    a = levels_img[ys, xs][both]
    b = levels_img[yt, xt][both]
    return np.bincount(a * levels + b, minlength=levels * levels).reshape(levels, levels)


def compute_glcm(gray: np.ndarray, mask: np.ndarray, levels: int = DEFAULT_LEVELS,
                 distance: int = DEFAULT_DISTANCE, angle: int = 0) -> GlcmMatrix:
    """Symmetric, normalized co-occurrence matrix of the masked gray image."""
    if levels < 2:
        raise ParameterError(f"levels must be >= 2, got {levels}")
    if distance < 1:
        raise ParameterError(f"distance must be >= 1, got {distance}")
    gray = as_gray(gray)
    mask = as_mask(mask, gray.shape)
    if not mask.any():
        raise EmptyRegionError("no pixels in region")
    counts = glcm_counts(quantize(gray, levels), mask, levels, distance, angle)
    sym = (counts + counts.T).astype(np.float64)
    total = sym.sum()
    if total == 0:
        raise NoPairsError(f"mask has no pixel pairs at distance {distance}, angle {angle}")
    return GlcmMatrix(levels, distance, angle, sym / total)


# ---------------------------------------------------------------------------
# Haralick descriptors


@dataclass
class HaralickResult:
    values: np.ndarray
    degenerate: list[str] = field(default_factory=list)


def _entropy(p: np.ndarray) -> float:
    nz = p[p > 0]
    return float(-np.sum(nz * np.log2(nz)))


def haralick(glcm, return_flags: bool = False):
    """The 14 Haralick descriptors of a normalized GLCM.

    Gray levels are indexed from 1, entropies use log base 2 with
    0 log 0 = 0. Quantities that reduce to 0/0 on degenerate matrices
    (a single populated row/column) are returned as 0; their names are
    reported when ``return_flags`` is true.
    """
    p = glcm.entries if isinstance(glcm, GlcmMatrix) else np.asarray(glcm, dtype=np.float64)
    m = p.shape[0]
    idx = np.arange(1, m + 1, dtype=np.float64)
    flags = []

    px = p.sum(axis=1)
    py = p.sum(axis=0)
    mux = idx @ px
    muy = idx @ py
    varx = ((idx - mux) ** 2) @ px
    vary = ((idx - muy) ** 2) @ py

    diff = np.abs(idx[:, None] - idx[None, :]).astype(np.intp)
    ssum = (idx[:, None] + idx[None, :]).astype(np.intp)
    p_diff = np.bincount(diff.ravel(), weights=p.ravel(), minlength=m)  # k = 0..m-1
    p_sum = np.bincount(ssum.ravel(), weights=p.ravel(), minlength=2 * m + 1)  # k = 2..2m
    k_diff = np.arange(m, dtype=np.float64)
    k_sum = np.arange(2 * m + 1, dtype=np.float64)

    f1 = float(np.sum(p * p))
    f2 = float((k_diff ** 2) @ p_diff)
    if varx > 0 and vary > 0:
        f3 = float((idx @ p @ idx - mux * muy) / math.sqrt(varx * vary))
    else:
        f3 = 0.0
        flags.append("correlation")
    f4 = float(varx)
    f5 = float(np.sum(p / (1.0 + (idx[:, None] - idx[None, :]) ** 2)))
    f6 = float(k_sum @ p_sum)
    f7 = float(((k_sum - f6) ** 2) @ p_sum)
    f8 = _entropy(p_sum)
    f9 = _entropy(p)
    f10 = float(((k_diff - k_diff @ p_diff) ** 2) @ p_diff)
    f11 = _entropy(p_diff)

    hx, hy = _entropy(px), _entropy(py)
    outer = np.outer(px, py)
    nz = p > 0
    hxy1 = float(-np.sum(p[nz] * np.log2(outer[nz])))
    hxy2 = _entropy(outer)
    if max(hx, hy) > 0:
        f12 = (f9 - hxy1) / max(hx, hy)
    else:
        f12 = 0.0
        flags.append("imc1")
    # the exponential form assumes natural-log entropies
    gap = max(0.0, (hxy2 - f9) * math.log(2.0))
    f13 = math.sqrt(max(0.0, 1.0 - math.exp(-2.0 * gap)))

    f14, mcc_ok = _max_correlation(p, px, py)
    if not mcc_ok:
        flags.append("mcc")

    values = np.array([f1, f2, f3, f4, f5, f6, f7, f8, f9, f10, f11, f12, f13, f14])
    if return_flags:
        return HaralickResult(values, flags)
    return values


def _max_correlation(p, px, py):
    """sqrt of the second-largest eigenvalue of Q(i,j) = sum_k p(i,k)p(j,k)/(px(i)py(k)).

    Q is similar to the symmetric PSD matrix B B^T with
    B(i,k) = p(i,k)/sqrt(px(i)py(k)), which is what gets diagonalized.
    """
    rows = px > 0
    cols = py > 0
    if rows.sum() < 2:
        return 0.0, False
    sub = p[np.ix_(rows, cols)]
    b = sub / np.sqrt(np.outer(px[rows], py[cols]))
    eig = np.linalg.eigvalsh(b @ b.T)  # ascending
    return math.sqrt(max(0.0, float(eig[-2]))), True


def texture_vector(gray: np.ndarray, mask: np.ndarray, levels: int = DEFAULT_LEVELS,
                   distance: int = DEFAULT_DISTANCE) -> np.ndarray:
    """Haralick descriptors averaged over the four orientations."""
    per_angle = [haralick(compute_glcm(gray, mask, levels, distance, a)) for a in ORIENTATIONS]
    return np.mean(per_angle, axis=0)


# ---------------------------------------------------------------------------
# histogram


def hist_index(pixels: np.ndarray) -> np.ndarray:
    bins = np.minimum(np.floor(np.asarray(pixels) * HIST_BINS), HIST_BINS - 1).astype(np.intp)
    return bins[..., 0] * HIST_BINS * HIST_BINS + bins[..., 1] * HIST_BINS + bins[..., 2]


def rgb_histogram(pixels: np.ndarray) -> np.ndarray:
    """Joint 16x16x16 count histogram of ``(N, 3)`` RGB pixels."""
    pixels = np.asarray(pixels, dtype=np.float64).reshape(-1, 3)
    if pixels.shape[0] == 0:
        raise EmptyRegionError("no pixels in region")
    return np.bincount(hist_index(pixels), minlength=N_HIST)


# ---------------------------------------------------------------------------
# assembly


def assemble(moments: np.ndarray, texture: np.ndarray, hist: np.ndarray) -> np.ndarray:
    """Concatenate the three blocks; histogram counts become proportions."""
    moments = np.asarray(moments, dtype=np.float64)
    texture = np.asarray(texture, dtype=np.float64)
    hist = np.asarray(hist, dtype=np.float64)
    if moments.shape != (N_COLOR,) or texture.shape != (N_TEXTURE,) or hist.shape != (N_HIST,):
        raise ParameterError(
            f"block sizes {moments.shape}, {texture.shape}, {hist.shape} "
            f"do not match ({N_COLOR},), ({N_TEXTURE},), ({N_HIST},)")
    return np.concatenate([moments, texture, hist / hist.sum()])


def extract(img: np.ndarray, mask: np.ndarray, gray: np.ndarray | None = None,
            levels: int = DEFAULT_LEVELS, distance: int = DEFAULT_DISTANCE,
            skewness: str = "cbrt") -> np.ndarray:
    """Full 4182-value descriptor of the lesion under ``mask``."""
    img = as_image(img)
    mask = as_mask(mask, img.shape[:2])
    pixels = img[mask]
    if pixels.shape[0] == 0:
        raise EmptyRegionError("no pixels in region")
    if gray is None:
        gray = to_gray(img)
    return assemble(
        all_color_moments(pixels, skewness),
        texture_vector(gray, mask, levels, distance),
        rgb_histogram(pixels),
    )


# ---------------------------------------------------------------------------
# standardization


@dataclass
class Standardizer:
    """Per-feature z-score followed by a per-block ``1/sqrt(block size)`` weight.

    The block weight gives each of the three blocks the same expected
    squared norm, so the 4096 histogram bins do not swamp distances.
    Features with zero training variance are centered only.
    """

    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=np.float64)
        mean = X.mean(axis=0)
        std = X.std(axis=0)
        std = np.where(std > 0, std, 1.0)
        weight = np.empty(X.shape[1])
        if X.shape[1] == N_FEATURES:
            for lo, hi in BLOCKS.values():
                weight[lo:hi] = 1.0 / math.sqrt(hi - lo)
        else:
            weight[:] = 1.0
        return cls(mean, std / weight)

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=np.float64) - self.mean) / self.scale
