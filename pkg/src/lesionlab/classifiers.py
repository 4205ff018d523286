"""Linear SVM (one-vs-rest Pegasos), k-NN and their OR-rule decision fusion."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError, ParameterError

DEFAULT_LAMBDA = 1e-4
DEFAULT_EPOCHS = 200
DEFAULT_K = 5
DEFAULT_K_SWEEP = (1, 3, 5, 7, 9)


# ---------------------------------------------------------------------------
# linear SVM


@dataclass
class LinearSvmModel:
    weights: np.ndarray  # (n_classes, n_features)
    bias: np.ndarray  # (n_classes,)
    lam: float
    epochs: int
    seed: int

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.weights.shape[1]:
            raise ParameterError(
                f"feature length {X.shape[-1]} does not match model ({self.weights.shape[1]})")
        return X @ self.weights.T + self.bias


def _check_training(X, y):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.intp)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ParameterError("X must be (n_samples, n_features) with one label per row")
    if not np.all(np.isfinite(X)):
        raise ParameterError("training features contain NaN or infinite values")
    if y.size == 0:
        raise ParameterError("empty training set")
    return X, y


def train_svm(X: np.ndarray, y: np.ndarray, n_classes: int | None = None,
              lam: float = DEFAULT_LAMBDA, epochs: int = DEFAULT_EPOCHS, seed: int = 0) -> LinearSvmModel:
    """One-vs-rest hinge-loss SVMs by stochastic subgradient descent.

    Each binary problem minimizes ``lam/2 |w|^2 + mean(hinge)``; step ``t``
    uses the step size ``1/(lam t)``. The bias is an extra constant-1
    feature (so it is regularized too). Every epoch visits the samples in
    a fresh permutation drawn from ``seed``; all classes share that order.

    The iterate is kept in its expansion ``w = sum_j a_j y_j x_j / (lam t)``
    over the training samples, so a step costs O(n) on the Gram matrix
    rather than O(n_features); ``w`` is materialized at the end.
    """
    X, y = _check_training(X, y)
    if n_classes is None:
        n_classes = int(y.max()) + 1
    if len(np.unique(y)) < 2:
        raise ParameterError("SVM training needs at least two classes")
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam}")
    if epochs < 1:
        raise ParameterError(f"epochs must be >= 1, got {epochs}")

    n = X.shape[0]
    signs = np.where(y[None, :] == np.arange(n_classes)[:, None], 1.0, -1.0)  # (C, n)
    gram = X @ X.T + 1.0
    acc = np.zeros((n_classes, n))  # violation counts times label signs
    scores = np.zeros((n_classes, n))  # acc @ gram, kept current
    rng = np.random.default_rng(seed)
    all_classes = np.arange(n_classes)

    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            # margin y <w_t, x_i> < 1 with w_t = acc @ X / (lam (t - 1)); w_1 = 0
            if t == 0:
                hit = all_classes
            else:
                hit = (signs[:, i] * scores[:, i] < lam * t).nonzero()[0]
            t += 1
            if hit.size:
                step = signs[hit, i]
                acc[hit, i] += step
                scores[hit] += step[:, None] * gram[i]

    coef = acc / (lam * t)
    return LinearSvmModel(coef @ X, coef.sum(axis=1), lam, epochs, seed)


def predict_svm(model: LinearSvmModel, x: np.ndarray) -> tuple[int, np.ndarray]:
    """Highest-scoring class; ties go to the lowest class index."""
    scores = model.decision_function(np.asarray(x, dtype=np.float64).ravel())
    return int(np.argmax(scores)), scores


def predict_svm_batch(model: LinearSvmModel, X: np.ndarray) -> np.ndarray:
    return np.argmax(model.decision_function(X), axis=1)


# ---------------------------------------------------------------------------
# k-NN


@dataclass
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int = DEFAULT_K

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.intp)
        if self.X.shape[0] == 0:
            raise ParameterError("k-NN needs a non-empty training set")
        if not 1 <= self.k <= self.X.shape[0]:
            raise ParameterError(f"k={self.k} must lie in [1, {self.X.shape[0]}]")


def _vote(neighbor_labels: np.ndarray) -> int:
    """Majority label; ties go to the tied label whose closest member ranks first."""
    labels, counts = np.unique(neighbor_labels, return_counts=True)
    tied = set(labels[counts == counts.max()].tolist())
    for lab in neighbor_labels:
        if lab in tied:
            return int(lab)
    raise AssertionError("unreachable")


def _sq_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances between the rows of A and B.

    Computed one query row at a time with the same operations, so a row's
    distances never depend on which other queries share the batch.
    """
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    b_sq = np.einsum("ij,ij->i", B, B)
    out = np.empty((A.shape[0], B.shape[0]))
    for r, a in enumerate(A):
        out[r] = np.maximum(b_sq - 2.0 * (B @ a) + a @ a, 0.0)
    return out


def knn_predict(model: KnnModel, x: np.ndarray) -> tuple[int, np.ndarray]:
    """Majority vote of the k nearest training samples (Euclidean).

    Returns the label and the indices of the neighbors, nearest first;
    equal distances keep training-set order.
    """
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.shape[0] != model.X.shape[1]:
        raise ParameterError(f"feature length {x.shape[0]} does not match model ({model.X.shape[1]})")
    d = _sq_distances(x, model.X)[0]
    order = np.argsort(d, kind="stable")[:model.k]
    return _vote(model.y[order]), order


def knn_predict_batch(model: KnnModel, X: np.ndarray) -> np.ndarray:
    d = _sq_distances(X, model.X)
    order = np.argsort(d, axis=1, kind="stable")[:, :model.k]
    return np.array([_vote(model.y[row]) for row in order], dtype=np.intp)


def select_k(X: np.ndarray, y: np.ndarray, candidates=DEFAULT_K_SWEEP) -> int:
    """Pick k by leave-one-out accuracy on the training set (smallest k on ties)."""
    X, y = _check_training(X, y)
    n = X.shape[0]
    usable = sorted(k for k in candidates if 1 <= k <= n - 1)
    if not usable:
        return 1
    d = _sq_distances(X, X)
    np.fill_diagonal(d, np.inf)
    order = np.argsort(d, axis=1, kind="stable")
    best_k, best_acc = usable[0], -1
    for k in usable:
        hits = sum(_vote(y[order[i, :k]]) == y[i] for i in range(n))
        if hits > best_acc:
            best_k, best_acc = k, hits
    return best_k


# ---------------------------------------------------------------------------
# fusion


@dataclass(frozen=True)
class FusedPrediction:
    labels: frozenset
    svm_label: int
    knn_label: int
    svm_scores: tuple = field(default=(), compare=False)

    def correct(self, truth: int) -> bool:
        return truth in self.labels


def fuse_or(svm_label: int, knn_label: int, svm_scores=()) -> FusedPrediction:
    """OR rule: the prediction set is the union of both classifiers' labels."""
    return FusedPrediction(frozenset({int(svm_label), int(knn_label)}), int(svm_label),
                           int(knn_label), tuple(np.asarray(svm_scores, dtype=float).tolist()))


# ---------------------------------------------------------------------------
# model file: magic, u32 version, u32 header length, JSON header, float64 payload

MAGIC = b"LESNLAB\x00"
FORMAT_VERSION = 1


@dataclass
class ModelBundle:
    classes: list[str]
    svm: LinearSvmModel
    knn: KnnModel
    mean: np.ndarray
    scale: np.ndarray
    extra: dict = field(default_factory=dict)


def save_model(path, bundle: ModelBundle) -> None:
    arrays = {
        "svm_weights": bundle.svm.weights,
        "svm_bias": bundle.svm.bias,
        "knn_X": bundle.knn.X,
        "knn_y": bundle.knn.y.astype(np.float64),
    }
    layout, offset_ = {}, 0
    for name, arr in arrays.items():
        layout[name] = {"shape": list(arr.shape), "offset": offset_}
        offset_ += arr.size * 8
    header = {
        "format": "lesionlab-model",
        "version": FORMAT_VERSION,
        "classes": bundle.classes,
        "lambda": bundle.svm.lam,
        "epochs": bundle.svm.epochs,
        "seed": bundle.svm.seed,
        "k": bundle.knn.k,
        "standardization": {"mean": bundle.mean.tolist(), "scale": bundle.scale.tolist()},
        "arrays": layout,
        **bundle.extra,
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", FORMAT_VERSION, len(blob)))
        fh.write(blob)
        for arr in arrays.values():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_model(path) -> ModelBundle:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise DataError(f"{path}: not a lesionlab model file")
    version, hlen = struct.unpack_from("<II", data, len(MAGIC))
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported model version {version}")
    start = len(MAGIC) + 8
    header = json.loads(data[start:start + hlen].decode("utf-8"))
    payload = start + hlen
    arrays = {}
    for name, info in header["arrays"].items():
        count = int(np.prod(info["shape"])) if info["shape"] else 1
        arrays[name] = np.frombuffer(data, dtype="<f8", count=count,
                                     offset=payload + info["offset"]).reshape(info["shape"]).copy()
    svm = LinearSvmModel(arrays["svm_weights"], arrays["svm_bias"], header["lambda"],
                         header["epochs"], header["seed"])
    knn = KnnModel(arrays["knn_X"], arrays["knn_y"].astype(np.intp), header["k"])
    std = header["standardization"]
    known = {"format", "version", "classes", "lambda", "epochs", "seed", "k", "standardization", "arrays"}
    extra = {k: v for k, v in header.items() if k not in known}
    return ModelBundle(header["classes"], svm, knn, np.array(std["mean"]), np.array(std["scale"]), extra)
