"""Stage orchestration: preprocess -> segment -> features -> trials, plus on-disk artifacts."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import classifiers as clf
from . import evaluation as ev
from .config import PipelineConfig, dump_config
from .dataset import DatasetManifest, ImageEntry
from .errors import DataError, LesionLabError, NoPairsError, PipelineError
from .features import BLOCKS, N_FEATURES, Standardizer, extract
from .imagecore import load_image, load_mask, save_mask, to_gray
from .preprocess import preprocess
from .segmentation import GrowParams, LesionRegion, Seed, segment
from .svgplot import segmentation_svg

logger = logging.getLogger(__name__)


@dataclass
class Sample:
    image_id: str
    region_id: int
    label: str
    features: np.ndarray


@dataclass
class ImageResult:
    entry: ImageEntry
    regions: list[LesionRegion]
    samples: list[Sample]
    seg_scores: ev.SegScores | None = None


def min_area_for(shape, config: PipelineConfig) -> int:
    if config.min_area > 0:
        return config.min_area
    return max(1, math.ceil(config.min_area_fraction * shape[0] * shape[1]))


def segment_image(img: np.ndarray, config: PipelineConfig, image_id: str = "",
                  seeds: list[Seed] | None = None):
    """Preprocess and segment one RGB image; returns (preprocessed, gray, regions)."""
    pre = preprocess(img, config.sigma, config.se_size, config.morph_order)
    gray = to_gray(pre)
    params = GrowParams(config.tolerance, config.connectivity, config.reference)
    regions = segment(gray, params, min_area=min_area_for(gray.shape, config),
                      percentile=config.percentile, image_id=image_id, seeds=seeds)
    return pre, gray, regions


def region_features(pre, gray, region: LesionRegion, config: PipelineConfig) -> np.ndarray:
    return extract(pre, region.mask, gray, config.levels, config.distance, config.skewness)


def process_image(entry: ImageEntry, config: PipelineConfig, seeds=None,
                  with_features: bool = True) -> ImageResult:
    try:
        img = load_image(entry.path)
        pre, gray, regions = segment_image(img, config, entry.image_id, seeds)
        samples = []
        if with_features:
            for r in regions:
                try:
                    vec = region_features(pre, gray, r, config)
                except NoPairsError as exc:
                    logger.warning("%s region %d skipped: %s", entry.image_id, r.region_id, exc)
                    continue
                samples.append(Sample(entry.image_id, r.region_id, entry.label, vec))
        scores = None
        if entry.mask_path is not None:
            truth = load_mask(entry.mask_path)
            union = np.zeros(truth.shape, dtype=bool)
            for r in regions:
                union |= r.mask
            scores = ev.seg_metrics(union, truth)
    except DataError:
        raise
    except LesionLabError as exc:
        raise PipelineError(f"{entry.path}: {exc}") from exc
    if not regions:
        logger.warning("%s: no lesion region found", entry.image_id)
    return ImageResult(entry, regions, samples, scores)


def _process(args):
    return process_image(*args)


def process_manifest(manifest: DatasetManifest, config: PipelineConfig, jobs: int = 1,
                     with_features: bool = True, seeds=None) -> list[ImageResult]:
    cells = [(e, config, seeds, with_features) for e in manifest.entries]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_process, cells))
    return [_process(c) for c in cells]


# ---------------------------------------------------------------------------
# artifacts


def write_regions(results: list[ImageResult], out_dir: Path, masks: bool = True) -> None:
    rows = []
    for res in results:
        for r in res.regions:
            seed = r.seed or Seed(-1, -1)
            rows.append((res.entry.image_id, r.region_id, seed.x, seed.y, r.area, " ".join(map(str, r.bbox))))
            if masks:
                d = out_dir / "segments" / res.entry.label
                d.mkdir(parents=True, exist_ok=True)
                save_mask(d / f"{res.entry.stem}.region{r.region_id}.png", r.mask)
    ev.write_csv(out_dir / "regions.csv", ("image", "region_id", "seed_x", "seed_y", "area", "bbox"), rows)


def seg_summary(results: list[ImageResult], classes) -> dict:
    per_class = {c: [] for c in classes}
    for res in results:
        if res.seg_scores is not None:
            per_class[res.entry.label].append(res.seg_scores)
    out = {}
    for c, scores in per_class.items():
        if scores:
            out[c] = {m: float(np.mean([getattr(s, m) for s in scores])) for m in ev.SEG_MEASURES}
    return out


def write_seg_report(results: list[ImageResult], classes, out_dir: Path) -> dict:
    rows = [(res.entry.image_id, res.entry.label, *(getattr(res.seg_scores, m) for m in ev.SEG_MEASURES))
            for res in results if res.seg_scores is not None]
    ev.write_csv(out_dir / "seg_report.csv", ("image", "class", *ev.SEG_MEASURES), rows)
    summary = seg_summary(results, classes)
    with open(out_dir / "seg_report.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"class_means": summary, "images": len(rows)}, fh, indent=1, sort_keys=True)
        fh.write("\n")
    if summary:
        (out_dir / "seg_report.svg").write_text(segmentation_svg(summary), encoding="utf-8")
    return summary


def collect_samples(results: list[ImageResult]) -> list[Sample]:
    return [s for res in results for s in res.samples]


def write_features(samples: list[Sample], classes, config: PipelineConfig, out_dir: Path) -> None:
    header = ("image", "region_id", "class", *(f"f{i}" for i in range(N_FEATURES)))
    rows = ((s.image_id, s.region_id, s.label, *s.features.tolist()) for s in samples)
    ev.write_csv(out_dir / "features.csv", header, rows)
    meta = {
        "layout": {name: list(span) for name, span in BLOCKS.items()},
        "n_features": N_FEATURES,
        "classes": list(classes),
        "levels": config.levels,
        "distance": config.distance,
        "sigma": config.sigma,
        "skewness": config.skewness,
        "config": dump_config(config),
        "n_samples": len(samples),
    }
    if samples:
        scaler = Standardizer.fit(np.array([s.features for s in samples]))
        meta["standardization"] = {"mean": scaler.mean.tolist(), "scale": scaler.scale.tolist()}
    with open(out_dir / "features.meta.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
        fh.write("\n")


def read_features(path, classes=None):
    """Load ``features.csv``; returns (samples, classes)."""
    path = Path(path)
    meta_path = path.with_name("features.meta.json")
    if classes is None and meta_path.is_file():
        classes = json.loads(meta_path.read_text(encoding="utf-8"))["classes"]
    samples = []
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if len(header) != 3 + N_FEATURES:
                raise DataError(f"{path}: expected {3 + N_FEATURES} columns, got {len(header)}")
            for row in reader:
                samples.append(Sample(row[0], int(row[1]), row[2], np.array(row[3:], dtype=np.float64)))
    except (OSError, StopIteration, ValueError) as exc:
        raise DataError(f"{path}: cannot read features ({exc})") from exc
    if classes is None:
        classes = sorted({s.label for s in samples})
    unknown = {s.label for s in samples} - set(classes)
    if unknown:
        raise DataError(f"{path}: samples with undeclared classes {sorted(unknown)}")
    return samples, list(classes)


def to_arrays(samples: list[Sample], classes):
    index = {c: i for i, c in enumerate(classes)}
    X = np.array([s.features for s in samples]).reshape(len(samples), N_FEATURES)
    y = np.array([index[s.label] for s in samples], dtype=np.intp)
    return X, y


def trial_config(config: PipelineConfig) -> ev.TrialConfig:
    return ev.TrialConfig(tuple(config.fractions), config.trials, config.seed, config.lam,
                          config.epochs, config.k, tuple(config.k_sweep))


def evaluate_samples(samples, classes, config: PipelineConfig, jobs: int = 1) -> ev.Report:
    X, y = to_arrays(samples, classes)
    return ev.run_trials(X, y, list(classes), trial_config(config), jobs=jobs)


def train_bundle(samples, classes, config: PipelineConfig) -> clf.ModelBundle:
    """Fit standardization, SVM and k-NN on every sample."""
    X, y = to_arrays(samples, classes)
    scaler = Standardizer.fit(X)
    Xs = scaler.transform(X)
    svm = clf.train_svm(Xs, y, len(classes), lam=config.lam, epochs=config.epochs, seed=config.seed)
    k = clf.select_k(Xs, y, config.k_sweep) if config.k_sweep else min(config.k, len(y))
    knn = clf.KnnModel(Xs, y, k)
    extra = {"levels": config.levels, "distance": config.distance, "sigma": config.sigma,
             "config": dump_config(config)}
    return clf.ModelBundle(list(classes), svm, knn, scaler.mean, scaler.scale, extra)


def predict_image(bundle: clf.ModelBundle, path, config: PipelineConfig, seeds=None) -> list[dict]:
    """Segment ``path`` and classify every region.

    The deployed label is the SVM label; the OR-fused set is reported
    alongside it.
    """
    img = load_image(path)
    pre, gray, regions = segment_image(img, config, str(path), seeds)
    scaler = Standardizer(bundle.mean, bundle.scale)
    out = []
    for r in regions:
        try:
            x = scaler.transform(region_features(pre, gray, r, config))
        except NoPairsError as exc:
            logger.warning("%s region %d skipped: %s", path, r.region_id, exc)
            continue
        svm_label, scores = clf.predict_svm(bundle.svm, x)
        knn_label, _ = clf.knn_predict(bundle.knn, x)
        fused = clf.fuse_or(svm_label, knn_label, scores)
        out.append({
            "image": str(path), "region_id": r.region_id,
            "label": bundle.classes[svm_label],
            "svm": bundle.classes[svm_label], "knn": bundle.classes[knn_label],
            "fused": "|".join(bundle.classes[i] for i in sorted(fused.labels)),
        })
    return out


def run_all(manifest: DatasetManifest, config: PipelineConfig, out_dir, jobs: int = 1) -> ev.Report:
    """Every stage end to end; writes regions, segmentation, features and report files."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results = process_manifest(manifest, config, jobs=jobs)
    write_regions(results, out_dir)
    write_seg_report(results, manifest.classes, out_dir)
    samples = collect_samples(results)
    write_features(samples, manifest.classes, config, out_dir)
    try:
        report = evaluate_samples(samples, manifest.classes, config, jobs=jobs)
    except DataError:
        raise
    except LesionLabError as exc:
        raise PipelineError(f"evaluation: {exc}") from exc
    ev.write_report(report, out_dir)
    return report
