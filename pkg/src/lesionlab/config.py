"""Flat ``key = value`` pipeline configuration."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError

DEFAULT_CLASSES = ("melanoma", "bullae", "seborrheic-keratosis", "shingles", "squamous-cell")


def _int_list(text: str) -> tuple:
    text = text.strip()
    if not text:
        return ()
    return tuple(int(v) for v in text.split(","))


def _str_list(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    classes: tuple = DEFAULT_CLASSES
    sigma: float = 0.85
    se_size: int = 3
    morph_order: str = "dilate-erode"
    tolerance: float = 0.12
    connectivity: int = 8
    reference: str = "seed"
    percentile: float = 10.0
    min_area: int = 0  # 0: derive from min_area_fraction
    min_area_fraction: float = 0.001
    levels: int = 32
    distance: int = 1
    skewness: str = "cbrt"
    lam: float = 1e-4
    epochs: int = 200
    k: int = 5
    k_sweep: tuple = (1, 3, 5, 7, 9)
    fractions: tuple = (30, 40, 50, 60, 70)
    trials: int = 20

    def validate(self) -> "PipelineConfig":
        checks = [
            (self.sigma > 0, "preprocess.sigma must be > 0"),
            (self.se_size >= 1 and self.se_size % 2 == 1, "preprocess.se_size must be odd and >= 1"),
            (self.morph_order in ("dilate-erode", "erode-dilate"),
             "preprocess.morph_order must be dilate-erode or erode-dilate"),
            (0 <= self.tolerance <= 1, "segmentation.tolerance must lie in [0, 1]"),
            (self.connectivity in (4, 8), "segmentation.connectivity must be 4 or 8"),
            (self.reference in ("seed", "mean"), "segmentation.reference must be seed or mean"),
            (0 < self.percentile < 100, "segmentation.percentile must lie in (0, 100)"),
            (self.min_area >= 0, "segmentation.min_area must be >= 0"),
            (0 < self.min_area_fraction < 1, "segmentation.min_area_fraction must lie in (0, 1)"),
            (self.levels >= 2, "features.levels must be >= 2"),
            (self.distance >= 1, "features.distance must be >= 1"),
            (self.skewness in ("cbrt", "standard"), "features.skewness must be cbrt or standard"),
            (self.lam > 0, "svm.lambda must be > 0"),
            (self.epochs >= 1, "svm.epochs must be >= 1"),
            (self.k >= 1, "knn.k must be >= 1"),
            (all(k >= 1 for k in self.k_sweep), "knn.k_sweep entries must be >= 1"),
            (len(self.fractions) > 0 and all(0 < f < 100 for f in self.fractions),
             "trials.fractions must be percentages in (0, 100)"),
            (self.trials >= 1, "trials.count must be >= 1"),
            (len(self.classes) >= 2 and len(set(self.classes)) == len(self.classes),
             "dataset.classes must list at least two distinct names"),
            ("masks" not in self.classes, "'masks' is reserved for ground-truth masks"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)
        return self


# config key -> (attribute, parser)
KEYS = {
    "seed": ("seed", int),
    "dataset.classes": ("classes", _str_list),
    "preprocess.sigma": ("sigma", float),
    "preprocess.se_size": ("se_size", int),
    "preprocess.morph_order": ("morph_order", str.strip),
    "segmentation.tolerance": ("tolerance", float),
    "segmentation.connectivity": ("connectivity", int),
    "segmentation.reference": ("reference", str.strip),
    "segmentation.percentile": ("percentile", float),
    "segmentation.min_area": ("min_area", int),
    "segmentation.min_area_fraction": ("min_area_fraction", float),
    "features.levels": ("levels", int),
    "features.distance": ("distance", int),
    "features.skewness": ("skewness", str.strip),
    "svm.lambda": ("lam", float),
    "svm.epochs": ("epochs", int),
    "knn.k": ("k", int),
    "knn.k_sweep": ("k_sweep", _int_list),
    "trials.fractions": ("fractions", _int_list),
    "trials.count": ("trials", int),
}
assert {a for a, _ in KEYS.values()} == {f.name for f in fields(PipelineConfig)}


def apply(config: PipelineConfig, key: str, value: str) -> PipelineConfig:
    key = key.strip()
    if key not in KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    attr, parse = KEYS[key]
    try:
        parsed = parse(value.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {value!r} ({exc})") from exc
    return replace(config, **{attr: parsed})


def parse_assignment(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise ConfigError(f"expected key=value, got {text!r}")
    key, value = text.split("=", 1)
    return key.strip(), value.strip()


def parse_config(text: str, overrides=(), source: str = "<config>") -> PipelineConfig:
    """Parse ``key = value`` lines (``#`` starts a comment), then apply overrides."""
    config = PipelineConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            config = apply(config, *parse_assignment(line))
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from exc
    for item in overrides:
        config = apply(config, *parse_assignment(item))
    return config.validate()


def load_config(path=None, overrides=()) -> PipelineConfig:
    """Read ``path`` (if any) and then apply ``key=value`` overrides in order."""
    if path is None:
        return parse_config("", overrides)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, overrides, str(path))


def dump_config(config: PipelineConfig) -> str:
    lines = []
    for key, (attr, _) in KEYS.items():
        value = getattr(config, attr)
        if isinstance(value, tuple):
            value = ",".join(str(v) for v in value)
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"
