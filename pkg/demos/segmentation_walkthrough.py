"""Segment one synthetic lesion step by step and score it against its mask.

Run:  python3 demos/segmentation_walkthrough.py [out_dir]
"""

import sys
import tempfile
from pathlib import Path

import numpy as np

from lesionlab.config import load_config
from lesionlab.dataset import make_fixtures
from lesionlab.evaluation import seg_metrics
from lesionlab.imagecore import load_image, load_mask, save_mask, to_gray
from lesionlab.preprocess import preprocess
from lesionlab.segmentation import GrowParams, region_grow, segment, select_seeds

out = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(tempfile.mkdtemp(prefix="lesionlab_"))
manifest = make_fixtures(out / "fixtures", seed=0, per_class=1)
entry = manifest.entries[0]
config = load_config()

img = load_image(entry.path)
pre = preprocess(img, config.sigma, config.se_size, config.morph_order)
gray = to_gray(pre)
print(f"{entry.image_id}: {img.shape[1]}x{img.shape[0]}, gray range {gray.min():.3f}..{gray.max():.3f}")

# seeds are dark-pixel components; each one grows within tau of its seed value
seeds = select_seeds(gray, percentile=config.percentile)
print(f"{len(seeds)} seed(s):", ", ".join(f"({s.x}, {s.y})" for s in seeds))

params = GrowParams(config.tolerance, config.connectivity, config.reference)
for tau in (0.04, 0.08, config.tolerance, 0.2):
    area = sum(int(region_grow(gray, s, GrowParams(tau)).sum()) for s in seeds)
    print(f"tau={tau:.2f}  grown pixels {area}")

regions = segment(gray, params, percentile=config.percentile, image_id=entry.image_id)
union = np.zeros(gray.shape, dtype=bool)
for r in regions:
    union |= r.mask
    print(f"region {r.region_id}: area {r.area}, bbox {r.bbox}")

scores = seg_metrics(union, load_mask(entry.mask_path))
print("scores:", ", ".join(f"{k}={v:.4f}" for k, v in scores.as_dict().items()))
save_mask(out / "segmented.png", union)
print(f"mask written to {out / 'segmented.png'}")
