import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import ndimage

from lesionlab.errors import ParameterError
from lesionlab.segmentation import (
    GrowParams, Seed, extract_regions, region_grow, segment, select_seeds,
)
from oracles import flood_fill, reachable


def two_level(rng, size=32, noise=0.04):
    """Blobby 0.2 / 0.8 image with a little uniform noise."""
    field = ndimage.gaussian_filter(rng.standard_normal((size, size)), 2.5)
    img = np.where(field > 0, 0.2, 0.8) + rng.uniform(-noise, noise, (size, size))
    return np.clip(img, 0.0, 1.0)


def disk(shape, cy, cx, r):
    yy, xx = np.mgrid[:shape[0], :shape[1]]
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def test_matches_flood_fill_on_two_level_images():
    rng = np.random.default_rng(7)
    for _ in range(100):
        img = two_level(rng)
        seed = Seed(int(rng.integers(32)), int(rng.integers(32)))
        tol = float(rng.uniform(0.0, 0.7))
        for conn in (4, 8):
            got = region_grow(img, seed, GrowParams(tol, conn))
            assert np.array_equal(got, flood_fill(img, (seed.x, seed.y), tol, conn))


def test_dark_region_example():
    img = np.full((32, 32), 0.8)
    img[8:20, 5:25] = 0.2
    mask = region_grow(img, Seed(10, 10), GrowParams(0.3))
    assert np.array_equal(mask, img == 0.2)


def test_uniform_image_fills():
    img = np.full((9, 7), 0.4)
    for tol in (0.0, 0.1):
        assert region_grow(img, Seed(3, 5), GrowParams(tol)).all()


def test_zero_tolerance_is_equal_value_component(rng):
    img = rng.integers(0, 3, (20, 20)) / 2.0
    seed = Seed(4, 6)
    mask = region_grow(img, seed, GrowParams(0.0))
    lab, _ = ndimage.label(img == img[6, 4], structure=np.ones((3, 3)))
    assert np.array_equal(mask, lab == lab[6, 4])


def test_visit_order_invariance():
    rng = np.random.default_rng(11)
    for _ in range(20):
        img = rng.random((16, 16))
        seed = Seed(int(rng.integers(16)), int(rng.integers(16)))
        want = region_grow(img, seed, GrowParams(0.3))
        shuffled = flood_fill(img, (seed.x, seed.y), 0.3, 8, rng=rng)
        assert np.array_equal(want, shuffled)


def test_tolerance_monotone():
    rng = np.random.default_rng(5)
    for _ in range(100):
        img = rng.random((24, 24)) ** 2
        seed = Seed(int(rng.integers(24)), int(rng.integers(24)))
        t1, t2 = np.sort(rng.uniform(0, 0.6, 2))
        small = region_grow(img, seed, GrowParams(t1))
        big = region_grow(img, seed, GrowParams(t2))
        assert np.all(big[small])


@given(st.integers(0, 2 ** 32 - 1), st.sampled_from([4, 8]), st.sampled_from(["seed", "mean"]))
def test_grown_mask_connected_and_contains_seed(s, conn, ref):
    rng = np.random.default_rng(s)
    img = rng.random((14, 14))
    seed = Seed(int(rng.integers(14)), int(rng.integers(14)))
    mask = region_grow(img, seed, GrowParams(0.25, conn, ref))
    assert mask[seed.y, seed.x]
    assert len(reachable(mask, (seed.y, seed.x), conn)) == mask.sum()


def test_mean_reference_deterministic_and_bounded(rng):
    img = two_level(rng, 32)
    params = GrowParams(0.15, 8, "mean")
    a = region_grow(img, Seed(3, 3), params)
    b = region_grow(img, Seed(3, 3), params)
    assert np.array_equal(a, b)
    # levels are 0.6 apart with +-0.04 noise: the mean stays within 0.04 of the
    # seed's level, so the region is exactly that level's component
    assert np.array_equal(a, flood_fill(img, (3, 3), 0.3, 8))


def test_grow_params_validation():
    with pytest.raises(ParameterError):
        GrowParams(-0.1)
    with pytest.raises(ParameterError):
        GrowParams(0.1, 6)
    with pytest.raises(ParameterError):
        GrowParams(0.1, 8, "median")
    with pytest.raises(ParameterError):
        region_grow(np.zeros((4, 4)), Seed(4, 0))


# --- seeds -----------------------------------------------------------------

def test_uniform_image_has_no_seeds():
    assert select_seeds(np.full((64, 64), 0.6), min_area=20) == []


def test_one_dark_disk_one_seed():
    img = np.full((64, 64), 0.8)
    d = disk(img.shape, 30, 41, 5)
    img[d] = 0.2
    seeds = select_seeds(img, min_area=20)
    assert len(seeds) == 1
    assert d[seeds[0].y, seeds[0].x]


def test_two_blobs_two_seeds():
    img = np.full((64, 64), 0.8)
    a, b = disk(img.shape, 20, 15, 6), disk(img.shape, 40, 48, 7)
    img[a | b] = 0.25
    seeds = select_seeds(img, min_area=20)
    assert len(seeds) == 2
    hits = sorted((bool(a[s.y, s.x]), bool(b[s.y, s.x])) for s in seeds)
    assert hits == [(False, True), (True, False)]


def test_ring_seed_snaps_inside():
    img = np.full((64, 64), 0.9)
    ring = disk(img.shape, 32, 32, 12) & ~disk(img.shape, 32, 32, 9)
    img[ring] = 0.3
    img[32, 20] = 0.1  # darkest ring pixel
    (seed,) = select_seeds(img, min_area=20)
    assert ring[seed.y, seed.x]
    assert (seed.x, seed.y) == (20, 32)


def test_small_components_dropped():
    img = np.full((64, 64), 0.8)
    img[5:8, 5:8] = 0.1  # 9 px
    assert select_seeds(img, min_area=20) == []


# --- regions ---------------------------------------------------------------

def square(shape, top, left, size):
    m = np.zeros(shape, dtype=bool)
    m[top:top + size, left:left + size] = True
    return m


def test_extract_regions_examples():
    assert extract_regions([], 10) == []
    assert extract_regions([np.zeros((8, 8), bool)], 1) == []
    two = square((20, 20), 12, 2, 5) | square((20, 20), 1, 10, 5)
    regions = extract_regions([two], 10)
    assert [r.area for r in regions] == [25, 25]
    assert [r.bbox for r in regions] == [(1, 10, 6, 15), (12, 2, 17, 7)]
    assert [r.region_id for r in regions] == [0, 1]
    assert extract_regions([square((20, 20), 3, 3, 2)], 10) == []


def test_overlapping_masks_merge():
    a, b = square((20, 20), 2, 2, 6), square((20, 20), 5, 5, 6)
    (r,) = extract_regions([a, b], 1, seeds=[Seed(3, 3), Seed(6, 6)])
    assert r.area == (a | b).sum()
    assert r.seed == Seed(3, 3)


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 12))
def test_regions_partition_the_union(s, min_area):
    rng = np.random.default_rng(s)
    masks = [rng.random((16, 16)) > 0.75 for _ in range(2)]
    regions = extract_regions(masks, min_area)
    union = masks[0] | masks[1]
    lab, n = ndimage.label(union, structure=np.ones((3, 3)))
    sizes = np.bincount(lab.ravel())
    kept = np.isin(lab, [i for i in range(1, n + 1) if sizes[i] >= min_area])
    total = np.zeros_like(union)
    for r in regions:
        assert r.area >= min_area and r.area == r.mask.sum()
        assert not np.any(total & r.mask)
        total |= r.mask
    assert np.array_equal(total, kept)
    corners = [(r.bbox[0], r.bbox[1]) for r in regions]
    assert corners == sorted(corners)


def test_segment_with_manual_seed():
    img = np.full((40, 40), 0.8)
    img[5:13, 5:13] = 0.3  # 2 x 64 px: under a tenth of the image
    img[25:33, 25:33] = 0.2
    auto = segment(img, min_area=20)
    assert [r.area for r in auto] == [64, 64]
    (manual,) = segment(img, min_area=20, seeds=[Seed(7, 7)])
    assert manual.bbox == (5, 5, 13, 13) and manual.seed == Seed(7, 7)
