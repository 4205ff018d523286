"""Automatic seeding and region growing on the preprocessed luma plane."""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .errors import ParameterError
from .imagecore import as_gray, as_mask

DEFAULT_TOLERANCE = 0.12
DEFAULT_PERCENTILE = 10.0
DEFAULT_MIN_AREA_FRACTION = 0.001

_EIGHT = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, order=True)
class Seed:
    x: int
    y: int


@dataclass(frozen=True)
class GrowParams:
    tolerance: float = DEFAULT_TOLERANCE
    connectivity: int = 8
    reference: str = "seed"  # or "mean"

    def __post_init__(self):
        if not self.tolerance >= 0:
            raise ParameterError(f"tolerance must be >= 0, got {self.tolerance}")
        if self.connectivity not in (4, 8):
            raise ParameterError(f"connectivity must be 4 or 8, got {self.connectivity}")
        if self.reference not in ("seed", "mean"):
            raise ParameterError(f"reference must be 'seed' or 'mean', got {self.reference!r}")


@dataclass
class LesionRegion:
    """One 8-connected lesion component; the unit of classification."""

    mask: np.ndarray
    area: int
    bbox: tuple[int, int, int, int]  # top, left, bottom, right (exclusive)
    image_id: str = ""
    region_id: int = 0
    seed: Seed | None = field(default=None)


def default_min_area(shape) -> int:
    return max(1, math.ceil(DEFAULT_MIN_AREA_FRACTION * shape[0] * shape[1]))


def select_seeds(gray: np.ndarray, min_area: int | None = None,
                 percentile: float = DEFAULT_PERCENTILE) -> list[Seed]:
    """Seeds at the centroids of dark connected components.

    The dark set is every pixel strictly below the ``percentile``-th
    intensity; components (8-connected) smaller than ``min_area`` are
    dropped. A centroid that falls outside its own component is replaced
    by the component's darkest pixel (first in raster order on ties).
    """
    gray = as_gray(gray)
    if min_area is None:
        min_area = default_min_area(gray.shape)
    q = np.percentile(gray, percentile)
    labels, n = ndimage.label(gray < q, structure=_EIGHT)
    if n == 0:
        return []
    areas = np.bincount(labels.ravel(), minlength=n + 1)
    seeds = []
    for lab in range(1, n + 1):
        if areas[lab] < min_area:
            continue
        ys, xs = np.nonzero(labels == lab)
        cy = int(math.floor(ys.mean() + 0.5))
        cx = int(math.floor(xs.mean() + 0.5))
        if labels[cy, cx] != lab:
            k = int(np.argmin(gray[ys, xs]))
            cy, cx = int(ys[k]), int(xs[k])
        seeds.append(Seed(cx, cy))
    return seeds


def _offsets(width: int, connectivity: int) -> np.ndarray:
    w = width
    four = [-w, -1, 1, w]
    if connectivity == 4:
        return np.array(four)
    return np.array(four + [-w - 1, -w + 1, w - 1, w + 1])


def _grow_seed_reference(gray, seed, params):
    h, w = gray.shape
    allowed = np.zeros((h + 2, w + 2), dtype=bool)
    allowed[1:-1, 1:-1] = np.abs(gray - gray[seed.y, seed.x]) <= params.tolerance
    visited = np.zeros_like(allowed)
    start = (seed.y + 1) * (w + 2) + seed.x + 1
    flat_allowed = allowed.ravel()
    flat_visited = visited.ravel()
    flat_visited[start] = True
    frontier = np.array([start])
    offs = _offsets(w + 2, params.connectivity)
    # breadth-first by layers; the padding ring is never allowed
    while frontier.size:
        cand = (frontier[:, None] + offs).ravel()
        cand = cand[flat_allowed[cand] & ~flat_visited[cand]]
        if not cand.size:
            break
        cand = np.unique(cand)
        flat_visited[cand] = True
        frontier = cand
    return visited[1:-1, 1:-1].copy()


def _grow_mean_reference(gray, seed, params):
    h, w = gray.shape
    if params.connectivity == 4:
        steps = ((-1, 0), (0, -1), (0, 1), (1, 0))
    else:
        steps = ((-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))
    mask = np.zeros((h, w), dtype=bool)
    seen = np.zeros((h, w), dtype=bool)
    mask[seed.y, seed.x] = seen[seed.y, seed.x] = True
    total, count = float(gray[seed.y, seed.x]), 1
    heap = []

    def push_neighbors(y, x):
        for dy, dx in steps:
            ny, nx = y + dy, x + dx
            if 0 <= ny < h and 0 <= nx < w and not seen[ny, nx]:
                seen[ny, nx] = True
                heapq.heappush(heap, (ny, nx))

    push_neighbors(seed.y, seed.x)
    while heap:
        y, x = heapq.heappop(heap)
        v = gray[y, x]
        if abs(v - total / count) <= params.tolerance:
            mask[y, x] = True
            total += v
            count += 1
            push_neighbors(y, x)
    return mask


def region_grow(gray: np.ndarray, seed: Seed, params: GrowParams | None = None) -> np.ndarray:
    """Grow a region from ``seed``; returns a boolean mask.

    With the default seed-value reference the result is the connected
    component of ``{p : |gray(p) - gray(seed)| <= tolerance}`` containing
    the seed, independent of visit order. The running-mean reference pops
    candidates in lexicographic ``(row, col)`` order and rejects a pixel
    for good the first time it fails the test.
    """
    params = params or GrowParams()
    gray = as_gray(gray)
    h, w = gray.shape
    if not (0 <= seed.x < w and 0 <= seed.y < h):
        raise ParameterError(f"seed {seed} outside a {w}x{h} image")
    if params.reference == "seed":
        return _grow_seed_reference(gray, seed, params)
    return _grow_mean_reference(gray, seed, params)


def extract_regions(masks, min_area: int, image_id: str = "",
                    seeds: list[Seed] | None = None) -> list[LesionRegion]:
    """Split the union of grown masks into 8-connected lesion regions.

    Components smaller than ``min_area`` are dropped; the rest are numbered
    by the (top, left) corner of their bounding box. When ``seeds`` is
    given, each region records the first seed falling inside it.
    """
    masks = list(masks)
    if not masks:
        return []
    union = as_mask(masks[0]).copy()
    for m in masks[1:]:
        union |= as_mask(m, union.shape)
    labels, n = ndimage.label(union, structure=_EIGHT)
    slices = ndimage.find_objects(labels)
    found = []
    for lab, sl in enumerate(slices, start=1):
        comp = labels == lab
        area = int(comp.sum())
        if area < min_area:
            continue
        bbox = (sl[0].start, sl[1].start, sl[0].stop, sl[1].stop)
        first_seed = None
        for s in seeds or ():
            if comp[s.y, s.x]:
                first_seed = s
                break
        found.append(LesionRegion(comp, area, bbox, image_id, 0, first_seed))
    found.sort(key=lambda r: (r.bbox[0], r.bbox[1]))
    for k, r in enumerate(found):
        r.region_id = k
    return found


def segment(gray: np.ndarray, params: GrowParams | None = None, min_area: int | None = None,
            percentile: float = DEFAULT_PERCENTILE, image_id: str = "",
            seeds: list[Seed] | None = None) -> list[LesionRegion]:
    """Seed (automatically unless ``seeds`` is given), grow and split into regions."""
    gray = as_gray(gray)
    if min_area is None:
        min_area = default_min_area(gray.shape)
    if seeds is None:
        seeds = select_seeds(gray, min_area=min_area, percentile=percentile)
    masks = [region_grow(gray, s, params) for s in seeds]
    return extract_regions(masks, min_area, image_id=image_id, seeds=seeds)
