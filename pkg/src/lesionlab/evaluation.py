"""Segmentation scores, classification metrics and the repeated-split trial protocol."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import classifiers as clf
from .errors import DataError, ParameterError
from .features import Standardizer
from .imagecore import as_mask
from .svgplot import report_svg

logger = logging.getLogger(__name__)

DEFAULT_FRACTIONS = (30, 40, 50, 60, 70)
DEFAULT_TRIALS = 20
CLASSIFIERS = ("svm", "knn", "fused")


# ---------------------------------------------------------------------------
# segmentation


@dataclass(frozen=True)
class SegScores:
    MOL: float
    MUS: float
    MOS: float
    DSM: float
    ER: float

    def as_dict(self) -> dict:
        return {"MOL": self.MOL, "MUS": self.MUS, "MOS": self.MOS, "DSM": self.DSM, "ER": self.ER}


SEG_MEASURES = ("MOL", "MUS", "MOS", "DSM", "ER")


def seg_metrics(segmented, truth) -> SegScores:
    """Overlap scores of a segmentation ``segmented`` against ground truth ``truth``.

    MOL is the Jaccard index, DSM the Dice coefficient; MUS, MOS and ER are
    the missed, extra and total mislabelled areas relative to ``|truth|``.
    """
    g_mask = as_mask(truth)
    s_mask = as_mask(segmented)
    if s_mask.shape != g_mask.shape:
        raise ParameterError(f"mask shapes differ: {s_mask.shape} vs {g_mask.shape}")
    g = int(g_mask.sum())
    if g == 0:
        raise ParameterError("ground-truth mask is empty")
    s = int(s_mask.sum())
    inter = int(np.count_nonzero(s_mask & g_mask))
    union = s + g - inter
    missed = g - inter
    extra = s - inter
    return SegScores(
        MOL=inter / union,
        MUS=missed / g,
        MOS=extra / g,
        DSM=2.0 * inter / (s + g),
        ER=(missed + extra) / g,
    )


# ---------------------------------------------------------------------------
# classification


@dataclass
class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class."""

    counts: np.ndarray
    classes: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        c = self.counts
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ParameterError("confusion matrix must be square")
        if np.any(c < 0):
            raise ParameterError("confusion counts must be non-negative")
        if not self.classes:
            self.classes = [str(i) for i in range(c.shape[0])]

    @classmethod
    def from_predictions(cls, y_true, y_pred, n_classes: int, classes=None) -> "ConfusionMatrix":
        counts = np.zeros((n_classes, n_classes), dtype=np.int64)
        np.add.at(counts, (np.asarray(y_true, dtype=np.intp), np.asarray(y_pred, dtype=np.intp)), 1)
        return cls(counts, list(classes or []))

    @classmethod
    def from_fused(cls, y_true, svm_pred, knn_pred, n_classes: int, classes=None) -> "ConfusionMatrix":
        """Set-scored matrix: a correct set counts on the diagonal, a wrong one at (truth, svm)."""
        y_true = np.asarray(y_true, dtype=np.intp)
        svm_pred = np.asarray(svm_pred, dtype=np.intp)
        hit = (svm_pred == y_true) | (np.asarray(knn_pred, dtype=np.intp) == y_true)
        return cls.from_predictions(y_true, np.where(hit, y_true, svm_pred), n_classes, classes)


@dataclass
class ClassificationMetrics:
    precision: np.ndarray
    recall: np.ndarray
    f_measure: np.ndarray
    class_accuracy: np.ndarray  # one-vs-rest (TP+TN)/total per class
    accuracy: float  # trace / total
    macro_precision: float
    macro_recall: float
    macro_f: float
    micro_f: float
    undefined: list[str] = field(default_factory=list)


def _ratio(num, den, what, flags):
    out = np.zeros(len(num))
    for i, (n, d) in enumerate(zip(num, den)):
        if d > 0:
            out[i] = n / d
        else:
            flags.append(f"{what}[{i}]")
    return out


def classification_metrics(cm: ConfusionMatrix) -> ClassificationMetrics:
    """Per-class one-vs-rest precision, recall and F plus overall accuracy.

    Any 0/0 is reported as 0 and named in ``undefined``.
    """
    c = cm.counts
    total = int(c.sum())
    if c.size == 0 or total == 0:
        raise ParameterError("confusion matrix is empty")
    tp = np.diag(c).astype(np.float64)
    fp = c.sum(axis=0) - tp
    fn = c.sum(axis=1) - tp
    tn = total - tp - fp - fn
    flags: list[str] = []
    precision = _ratio(tp, tp + fp, "precision", flags)
    recall = _ratio(tp, tp + fn, "recall", flags)
    f = _ratio(2.0 * precision * recall, precision + recall, "f_measure", flags)
    class_acc = (tp + tn) / total
    accuracy = float(tp.sum() / total)
    return ClassificationMetrics(
        precision=precision,
        recall=recall,
        f_measure=f,
        class_accuracy=class_acc,
        accuracy=accuracy,
        macro_precision=float(precision.mean()),
        macro_recall=float(recall.mean()),
        macro_f=float(f.mean()),
        micro_f=accuracy,  # single-label: pooled TP/(TP+FP) == TP/(TP+FN) == accuracy
        undefined=flags,
    )


# ---------------------------------------------------------------------------
# trial protocol


@dataclass(frozen=True)
class TrialConfig:
    fractions: tuple = DEFAULT_FRACTIONS  # percent of each class used for training
    trials: int = DEFAULT_TRIALS
    seed: int = 0
    lam: float = clf.DEFAULT_LAMBDA
    epochs: int = clf.DEFAULT_EPOCHS
    k: int = clf.DEFAULT_K
    k_sweep: tuple = clf.DEFAULT_K_SWEEP  # empty -> always use k

    def __post_init__(self):
        if not self.fractions:
            raise ParameterError("at least one training fraction is required")
        for f in self.fractions:
            if not 0 < f < 100:
                raise ParameterError(f"training fraction {f}% outside (0, 100)")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")


def child_seed(master: int, fraction: int, trial: int) -> int:
    """Per-(fraction, trial) seed, independent of which other cells are run."""
    digest = hashlib.sha256(f"lesionlab/{master}/{fraction}/{trial}".encode()).digest()
    return int.from_bytes(digest[:8], "little")


def train_count(n: int, percent: int) -> int:
    """round(percent% of n), half up, at least 1 and leaving at least 1 for testing."""
    return min(max(1, (percent * n + 50) // 100), n - 1)


def stratified_split(y, percent: int, rng: np.random.Generator, classes=None):
    y = np.asarray(y, dtype=np.intp)
    n_classes = int(y.max()) + 1 if classes is None else len(classes)
    train, test = [], []
    for c in range(n_classes):
        idx = np.flatnonzero(y == c)
        if idx.size < 2:
            name = classes[c] if classes else str(c)
            raise DataError(f"class {name!r} has {idx.size} sample(s); at least 2 are needed to split")
        perm = rng.permutation(idx)
        n_train = train_count(idx.size, percent)
        train.append(perm[:n_train])
        test.append(perm[n_train:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


@dataclass
class TrialResult:
    fraction: int
    trial: int
    k: int
    confusion: dict  # classifier name -> ConfusionMatrix
    n_train: int
    n_test: int


def run_trial(X, y, n_classes: int, fraction: int, trial: int, config: TrialConfig) -> TrialResult:
    rng = np.random.default_rng(child_seed(config.seed, fraction, trial))
    train, test = stratified_split(y, fraction, rng, classes=[str(c) for c in range(n_classes)])
    svm_seed = int(rng.integers(0, 2 ** 32))
    scaler = Standardizer.fit(X[train])
    Xtr, Xte = scaler.transform(X[train]), scaler.transform(X[test])
    ytr, yte = y[train], y[test]

    svm = clf.train_svm(Xtr, ytr, n_classes, lam=config.lam, epochs=config.epochs, seed=svm_seed)
    k = clf.select_k(Xtr, ytr, config.k_sweep) if config.k_sweep else min(config.k, len(train))
    knn = clf.KnnModel(Xtr, ytr, k)
    svm_pred = clf.predict_svm_batch(svm, Xte)
    knn_pred = clf.knn_predict_batch(knn, Xte)
    confusion = {
        "svm": ConfusionMatrix.from_predictions(yte, svm_pred, n_classes),
        "knn": ConfusionMatrix.from_predictions(yte, knn_pred, n_classes),
        "fused": ConfusionMatrix.from_fused(yte, svm_pred, knn_pred, n_classes),
    }
    return TrialResult(fraction, trial, k, confusion, len(train), len(test))


def _run_cell(args):
    return run_trial(*args)


@dataclass
class Report:
    classes: list[str]
    config: TrialConfig
    results: list[TrialResult]

    def rows(self):
        """Long-format records ``(fraction, trial, classifier, class, metric, value)``."""
        for r in self.results:
            yield (r.fraction, r.trial, "knn", "all", "k", float(r.k))
            for name in CLASSIFIERS:
                m = classification_metrics(r.confusion[name])
                yield (r.fraction, r.trial, name, "all", "accuracy", m.accuracy)
                yield (r.fraction, r.trial, name, "all", "macro_precision", m.macro_precision)
                yield (r.fraction, r.trial, name, "all", "macro_recall", m.macro_recall)
                yield (r.fraction, r.trial, name, "all", "macro_f", m.macro_f)
                yield (r.fraction, r.trial, name, "all", "micro_f", m.micro_f)
                for ci, cname in enumerate(self.classes):
                    yield (r.fraction, r.trial, name, cname, "precision", float(m.precision[ci]))
                    yield (r.fraction, r.trial, name, cname, "recall", float(m.recall[ci]))
                    yield (r.fraction, r.trial, name, cname, "f_measure", float(m.f_measure[ci]))
                    yield (r.fraction, r.trial, name, cname, "accuracy", float(m.class_accuracy[ci]))

    def aggregates(self) -> dict:
        """min/avg/max of every (fraction, classifier, class, metric) over trials."""
        cells: dict = {}
        for fraction, _, name, cname, metric, value in self.rows():
            cells.setdefault(str(fraction), {}).setdefault(name, {}).setdefault(cname, {}) \
                .setdefault(metric, []).append(value)
        out: dict = {}
        for fraction, per_clf in cells.items():
            for name, per_class in per_clf.items():
                for cname, per_metric in per_class.items():
                    for metric, values in per_metric.items():
                        v = np.asarray(values)
                        out.setdefault(fraction, {}).setdefault(name, {}).setdefault(cname, {})[metric] = {
                            "min": float(v.min()), "avg": float(v.mean()), "max": float(v.max()),
                        }
        return out

    def macro_f_by_fraction(self) -> dict:
        """Average macro F per training fraction and classifier."""
        agg = self.aggregates()
        return {f: {name: agg[f][name]["all"]["macro_f"]["avg"] for name in CLASSIFIERS} for f in agg}

    def f_by_class(self, fraction: int | None = None) -> dict:
        """Average per-class F at ``fraction`` (default: the largest one run)."""
        agg = self.aggregates()
        f = str(fraction if fraction is not None else max(self.config.fractions))
        return {name: {c: agg[f][name][c]["f_measure"]["avg"] for c in self.classes} for name in CLASSIFIERS}

    def to_json(self) -> dict:
        cfg = self.config
        return {
            "classes": self.classes,
            "config": {
                "fractions": list(cfg.fractions), "trials": cfg.trials, "seed": cfg.seed,
                "lambda": cfg.lam, "epochs": cfg.epochs, "k": cfg.k, "k_sweep": list(cfg.k_sweep),
            },
            "trials": [
                {"fraction": r.fraction, "trial": r.trial, "k": r.k, "n_train": r.n_train,
                 "n_test": r.n_test,
                 "confusion": {name: r.confusion[name].counts.tolist() for name in CLASSIFIERS}}
                for r in self.results
            ],
            "aggregates": self.aggregates(),
            "macro_f_by_fraction": self.macro_f_by_fraction(),
            "f_by_class": self.f_by_class(),
        }


def run_trials(X, y, classes: list[str], config: TrialConfig | None = None, jobs: int = 1) -> Report:
    """Stratified repeated random splits at each training fraction.

    Every (fraction, trial) cell draws its split and SVM seed from
    ``child_seed``, so the report is identical for any ``jobs``.
    """
    config = config or TrialConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    n_classes = len(classes)
    for c, name in enumerate(classes):
        if np.count_nonzero(y == c) < 2:
            raise DataError(f"class {name!r} has fewer than 2 samples; cannot stratify")
    cells = [(X, y, n_classes, f, t, config) for f in config.fractions for t in range(config.trials)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, cells))
    else:
        results = [_run_cell(c) for c in cells]
    return Report(list(classes), config, results)


# ---------------------------------------------------------------------------
# serialization


def fmt(value) -> str:
    """Float formatting used in every CSV: 6 significant digits."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return f"{float(value):.6g}"


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


REPORT_HEADER = ("fraction", "trial", "classifier", "class", "metric", "value")


def write_report(report: Report, out_dir, svg: bool = True) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_csv(out_dir / "report.csv", REPORT_HEADER, report.rows())
    with open(out_dir / "report.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_json(), fh, indent=1, sort_keys=True)
        fh.write("\n")
    if svg:
        (out_dir / "report.svg").write_text(report_svg(report.to_json()), encoding="utf-8")


def summary_table(report_json: dict) -> str:
    """Plain-text summary: fractions x classifiers -> average macro F."""
    lines = [f"{'train %':>8}  {'SVM':>7}  {'k-NN':>7}  {'SVM+k-NN':>9}"]
    for f in sorted(report_json["macro_f_by_fraction"], key=int):
        row = report_json["macro_f_by_fraction"][f]
        lines.append(f"{f:>8}  {row['svm']:7.4f}  {row['knn']:7.4f}  {row['fused']:9.4f}")
    return "\n".join(lines)


def class_table(report_json: dict) -> str:
    """Plain-text per-class table: classifiers x classes -> average F."""
    classes = report_json["classes"]
    width = max(10, *(len(c) for c in classes))
    lines = ["classifier  " + "  ".join(f"{c:>{width}}" for c in classes)]
    labels = {"svm": "SVM", "knn": "k-NN", "fused": "SVM+k-NN"}
    for name in CLASSIFIERS:
        row = report_json["f_by_class"][name]
        lines.append(f"{labels[name]:<10}  " + "  ".join(f"{row[c]:>{width}.4f}" for c in classes))
    return "\n".join(lines)
