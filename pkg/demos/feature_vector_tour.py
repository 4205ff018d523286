"""Build the 4182-value descriptor of one region and look inside each block.

Run:  python3 demos/feature_vector_tour.py
"""

import tempfile
from pathlib import Path

import numpy as np

from lesionlab.config import load_config
from lesionlab.dataset import make_fixtures
from lesionlab.features import BLOCKS, N_FEATURES, compute_glcm, extract, feature_names, haralick
from lesionlab.pipeline import segment_image
from lesionlab.imagecore import load_image

out = Path(tempfile.mkdtemp(prefix="lesionlab_"))
entry = make_fixtures(out, seed=1, per_class=1).entries[3]
config = load_config()
pre, gray, regions = segment_image(load_image(entry.path), config, entry.image_id)
region = max(regions, key=lambda r: r.area)
print(f"{entry.image_id}: largest region has {region.area} pixels")

vec = extract(pre, region.mask, gray, config.levels, config.distance, config.skewness)
names = feature_names()
print(f"descriptor length {vec.size} (expected {N_FEATURES})")
for block, (lo, hi) in BLOCKS.items():
    part = vec[lo:hi]
    print(f"  {block:9s} [{lo:4d}, {hi:4d})  min {part.min():.4g}  max {part.max():.4g}")

lo, hi = BLOCKS["color"]
print("\nfirst color moments:")
for name, v in zip(names[lo:lo + 8], vec[lo:lo + 8]):
    print(f"  {name:20s} {v: .5f}")

lo, hi = BLOCKS["texture"]
print("\ntexture (orientation average):")
for name, v in zip(names[lo:hi], vec[lo:hi]):
    print(f"  {name:20s} {v: .5f}")

# the orientation average hides per-angle spread; show contrast per angle
for angle in (0, 45, 90, 135):
    glcm = compute_glcm(gray, region.mask, config.levels, config.distance, angle)
    print(f"  contrast at {angle:3d} deg: {haralick(glcm)[1]:.4f}")

lo, hi = BLOCKS["histogram"]
hist = vec[lo:hi]
top = np.argsort(hist)[::-1][:5]
print(f"\nhistogram: {np.count_nonzero(hist)} of {hi - lo} bins occupied, sum {hist.sum():.6f}")
for b in top:
    print(f"  bin {b:4d} (r{b // 256} g{b // 16 % 16} b{b % 16})  {hist[b]:.4f}")
