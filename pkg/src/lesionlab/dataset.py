"""Dataset layout: ingestion of a class-per-directory tree and synthetic fixtures.

Layout::

    root/<class>/<stem>.png|.ppm        images
    root/masks/<class>/<stem>.png       optional ground-truth masks
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

from .config import DEFAULT_CLASSES
from .errors import DataError
from .imagecore import image_size, load_image, load_mask, save_image, save_mask

logger = logging.getLogger(__name__)

IMAGE_SUFFIXES = (".png", ".ppm")


@dataclass
class ImageEntry:
    path: Path
    label: str
    mask_path: Path | None = None

    @property
    def stem(self) -> str:
        return self.path.stem

    @property
    def image_id(self) -> str:
        return f"{self.label}/{self.path.stem}"


@dataclass
class DatasetManifest:
    root: Path
    classes: list[str]
    entries: list[ImageEntry] = field(default_factory=list)

    def counts(self) -> dict:
        out = {c: 0 for c in self.classes}
        for e in self.entries:
            out[e.label] += 1
        return out


def ingest(root, classes=DEFAULT_CLASSES, check_decode: bool = True) -> DatasetManifest:
    """Enumerate images (lexicographically) and their optional masks under ``root``."""
    root = Path(root)
    if not root.is_dir():
        raise DataError(f"dataset root {root} is not a directory")
    known = set(classes) | {"masks"}
    for extra in sorted(p.name for p in root.iterdir() if p.is_dir() and p.name not in known):
        logger.warning("ignoring directory %s (not a declared class)", root / extra)
    manifest = DatasetManifest(root, list(classes))
    for label in classes:
        cdir = root / label
        if not cdir.is_dir():
            raise DataError(f"class directory missing for class {label!r}: {cdir}")
        files = sorted((p for p in cdir.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES),
                       key=lambda p: p.name)
        if not files:
            raise DataError(f"class {label!r} has no images in {cdir}")
        for path in files:
            if check_decode:
                load_image(path)
            mask_path = root / "masks" / label / f"{path.stem}.png"
            if mask_path.is_file():
                if load_mask(mask_path).shape != image_size(path):
                    raise DataError(f"{mask_path}: mask size does not match image {path}")
            else:
                mask_path = None
            manifest.entries.append(ImageEntry(path, label, mask_path))
    return manifest


# ---------------------------------------------------------------------------
# synthetic fixtures

# base RGB, texture amplitude, texture correlation length (pixels)
CLASS_STYLES = {
    "melanoma": ((0.30, 0.19, 0.14), 0.040, 3.0),
    "bullae": ((0.68, 0.47, 0.45), 0.012, 6.0),
    "seborrheic-keratosis": ((0.55, 0.40, 0.24), 0.045, 1.0),
    "shingles": ((0.74, 0.27, 0.27), 0.030, 2.0),
    "squamous-cell": ((0.48, 0.33, 0.33), 0.025, 4.0),
}
SKIN = np.array([0.88, 0.73, 0.63])


def _style(label: str, index: int):
    if label in CLASS_STYLES:
        return CLASS_STYLES[label]
    # classes outside the default five get a style derived from their position
    hue = (index * 0.17) % 1.0
    base = 0.25 + 0.35 * np.abs(np.sin(np.pi * (hue + np.array([0.0, 1 / 3, 2 / 3]))))
    return tuple(base), 0.02 + 0.01 * (index % 3), 1.0 + index % 4


def _noise(rng, shape, length):
    field_ = ndimage.gaussian_filter(rng.standard_normal(shape), length, mode="wrap")
    return field_ / field_.std()


def _blob(shape, cy, cx, ry, rx, rng):
    yy, xx = np.mgrid[0:shape[0], 0:shape[1]].astype(np.float64)
    ang = np.arctan2((yy - cy) / ry, (xx - cx) / rx)
    wobble = 1.0 + 0.10 * np.sin(3 * ang + rng.uniform(0, 2 * np.pi)) \
        + 0.05 * np.sin(5 * ang + rng.uniform(0, 2 * np.pi))
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= wobble ** 2


def synth_image(label: str, class_index: int, rng: np.random.Generator, size: int = 96):
    """One synthetic skin image with its exact lesion footprint."""
    shape = (size, size)
    color, amplitude, length = _style(label, class_index)
    skin = SKIN + rng.normal(0.0, 0.02, 3)
    img = skin * (1.0 + 0.03 * _noise(rng, shape, 8.0)[..., None]) \
        + 0.01 * rng.standard_normal(shape + (3,))

    s = size / 96.0
    if rng.random() < 0.25:
        r = lambda: rng.uniform(14, 18) * s  # noqa: E731
        blobs = [_blob(shape, size / 2 + rng.uniform(-4, 4) * s, 0.27 * size, r(), r(), rng),
                 _blob(shape, size / 2 + rng.uniform(-4, 4) * s, 0.73 * size, r(), r(), rng)]
    else:
        blobs = [_blob(shape, size / 2 + rng.uniform(-5, 5) * s, size / 2 + rng.uniform(-5, 5) * s,
                       rng.uniform(20, 26) * s, rng.uniform(20, 26) * s, rng)]
    mask = np.zeros(shape, dtype=bool)
    for b in blobs:
        mask |= b

    lesion = np.asarray(color) + rng.normal(0.0, 0.015, 3)
    texture = 1.0 + amplitude / 0.4 * _noise(rng, shape, length)[..., None]
    img = np.where(mask[..., None], lesion * texture, img)

    for _ in range(rng.integers(0, 3)):  # a few thin hairs on the surrounding skin
        y0, y1 = rng.uniform(0, size, 2)
        t = np.linspace(0.0, 1.0, 4 * size)
        ys = np.clip(np.round(y0 + (y1 - y0) * t), 0, size - 1).astype(int)
        xs = np.clip(np.round(t * (size - 1)), 0, size - 1).astype(int)
        if rng.random() < 0.5:
            ys, xs = xs, ys
        keep = ~ndimage.binary_dilation(mask, iterations=2)[ys, xs]
        ys, xs = ys[keep], xs[keep]
        img[ys, xs] = img[ys, xs] * 0.45
    return np.clip(img, 0.0, 1.0), mask


def make_fixtures(out, seed: int = 0, per_class=20, classes=DEFAULT_CLASSES, size: int = 96) -> DatasetManifest:
    """Write a deterministic synthetic dataset (images plus exact masks) under ``out``.

    ``per_class`` is an int or a ``{class: count}`` mapping.
    """
    out = Path(out)
    counts = per_class if isinstance(per_class, dict) else {c: int(per_class) for c in classes}
    for ci, label in enumerate(classes):
        (out / label).mkdir(parents=True, exist_ok=True)
        (out / "masks" / label).mkdir(parents=True, exist_ok=True)
        for i in range(counts[label]):
            rng = np.random.default_rng([seed, ci, i])
            img, mask = synth_image(label, ci, rng, size)
            stem = f"{label}_{i:03d}"
            save_image(out / label / f"{stem}.png", img)
            save_mask(out / "masks" / label / f"{stem}.png", mask)
    return ingest(out, classes)
