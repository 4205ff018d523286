"""``lesionlab`` command line.

Exit codes: 0 success, 2 config error, 3 data error, 4 pipeline error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from . import evaluation as ev
from . import pipeline as pl
from .classifiers import load_model, save_model
from .config import PipelineConfig, load_config, parse_config
from .dataset import ingest, make_fixtures
from .errors import ConfigError, DataError, LesionLabError, PipelineError
from .segmentation import Seed
from .svgplot import report_svg

logger = logging.getLogger("lesionlab")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_PIPELINE = 0, 2, 3, 4


def _seed_point(text: str) -> Seed:
    try:
        x, y = (int(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected x,y pixel coordinates, got {text!r}") from exc
    return Seed(x, y)


def _config(args) -> PipelineConfig:
    overrides = list(getattr(args, "set", None) or [])
    if isinstance(getattr(args, "seed", None), int):
        overrides.append(f"seed={args.seed}")
    if getattr(args, "fractions", None):
        overrides.append(f"trials.fractions={args.fractions}")
    if getattr(args, "trials", None):
        overrides.append(f"trials.count={args.trials}")
    return load_config(args.config, overrides)


def _manifest(args, config):
    return ingest(args.root, config.classes)


# ---------------------------------------------------------------------------
# verbs


def cmd_fixtures(args):
    config = _config(args)
    manifest = make_fixtures(args.out, seed=config.seed, per_class=args.per_class,
                             classes=config.classes, size=args.size)
    print(f"wrote {len(manifest.entries)} images to {args.out}")


def cmd_ingest(args):
    config = _config(args)
    manifest = _manifest(args, config)
    for label, n in manifest.counts().items():
        print(f"{label:<24} {n}")
    print(f"{'total':<24} {len(manifest.entries)}")
    if args.out:
        rows = [(e.image_id, e.label, str(e.path), str(e.mask_path or "")) for e in manifest.entries]
        ev.write_csv(args.out, ("image", "class", "path", "mask"), rows)


def cmd_segment(args):
    config = _config(args)
    manifest = _manifest(args, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = pl.process_manifest(manifest, config, jobs=args.jobs, with_features=False,
                                  seeds=args.seed or None)
    pl.write_regions(results, out)
    print(f"{sum(len(r.regions) for r in results)} regions from {len(results)} images -> {out / 'regions.csv'}")


def cmd_seg_eval(args):
    config = _config(args)
    manifest = _manifest(args, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = pl.process_manifest(manifest, config, jobs=args.jobs, with_features=False)
    if not any(r.seg_scores for r in results):
        raise DataError(f"no ground-truth masks under {Path(args.root) / 'masks'}")
    summary = pl.write_seg_report(results, manifest.classes, out)
    print(f"{'class':<24} " + " ".join(f"{m:>7}" for m in ev.SEG_MEASURES))
    for label, row in summary.items():
        print(f"{label:<24} " + " ".join(f"{row[m]:7.4f}" for m in ev.SEG_MEASURES))


def cmd_features(args):
    config = _config(args)
    manifest = _manifest(args, config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = pl.process_manifest(manifest, config, jobs=args.jobs)
    samples = pl.collect_samples(results)
    pl.write_features(samples, manifest.classes, config, out)
    print(f"{len(samples)} samples -> {out / 'features.csv'}")


def cmd_train(args):
    config = _config(args)
    samples, classes = pl.read_features(args.features)
    try:
        bundle = pl.train_bundle(samples, classes, config)
    except LesionLabError as exc:
        raise PipelineError(f"training: {exc}") from exc
    save_model(args.out, bundle)
    print(f"model ({len(samples)} samples, k={bundle.knn.k}) -> {args.out}")


def cmd_predict(args):
    bundle = load_model(args.model)
    if args.config is None and "config" in bundle.extra:
        # segment and describe new images exactly as the training data was
        config = parse_config(bundle.extra["config"], args.set or [], f"{args.model} header")
    else:
        config = _config(args)
    rows = []
    for path in args.images:
        rows += pl.predict_image(bundle, path, config, seeds=args.seed or None)
    header = ("image", "region_id", "label", "svm", "knn", "fused")
    table = [tuple(r[h] for h in header) for r in rows]
    if args.out:
        ev.write_csv(args.out, header, table)
    else:
        print(",".join(header))
        for row in table:
            print(",".join(str(v) for v in row))


def cmd_evaluate(args):
    config = _config(args)
    samples, classes = pl.read_features(args.features)
    report = _evaluate(samples, classes, config, args.jobs)
    ev.write_report(report, args.out)
    print(ev.summary_table(report.to_json()))


def _evaluate(samples, classes, config, jobs):
    try:
        return pl.evaluate_samples(samples, classes, config, jobs=jobs)
    except DataError:
        raise
    except LesionLabError as exc:
        raise PipelineError(f"evaluation: {exc}") from exc


def cmd_run_all(args):
    config = _config(args)
    start = time.perf_counter()
    manifest = _manifest(args, config)
    report = pl.run_all(manifest, config, args.out, jobs=args.jobs)
    print(ev.summary_table(report.to_json()))
    logger.info("run-all finished in %.1f s", time.perf_counter() - start)


def cmd_report(args):
    path = Path(args.dir) / "report.json"
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, ValueError) as exc:
        raise DataError(f"{path}: cannot read report ({exc})") from exc
    print("Average F-measure by training percentage (macro)")
    print(ev.summary_table(data))
    print()
    print(f"Average F-measure by class at {max(int(f) for f in data['macro_f_by_fraction'])}% training")
    print(ev.class_table(data))
    print()
    print("Accuracy min / avg / max")
    for f in sorted(data["aggregates"], key=int):
        cells = []
        for name in ev.CLASSIFIERS:
            a = data["aggregates"][f][name]["all"]["accuracy"]
            cells.append(f"{name}={a['min']:.3f}/{a['avg']:.3f}/{a['max']:.3f}")
        print(f"{f:>4}%  " + "  ".join(cells))
    if args.svg:
        (Path(args.dir) / "report.svg").write_text(report_svg(data), encoding="utf-8")


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lesionlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="verb", required=True)

    def verb(name, func, help_):
        p = sub.add_parser(name, help=help_, description=help_)
        p.set_defaults(func=func)
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE", help="config override (repeatable)")
        p.add_argument("-v", "--verbose", action="store_true")
        return p

    def rng_seed(p):
        p.add_argument("--seed", type=int, help="master random seed")

    def jobs(p):
        p.add_argument("--jobs", type=int, default=1, help="worker processes (output is identical)")

    p = verb("fixtures", cmd_fixtures, "write a synthetic dataset with exact ground-truth masks")
    p.add_argument("out")
    p.add_argument("--per-class", type=int, default=20)
    p.add_argument("--size", type=int, default=96)
    rng_seed(p)

    p = verb("ingest", cmd_ingest, "validate a dataset tree and list it")
    p.add_argument("root")
    p.add_argument("--out", help="optional manifest CSV")

    p = verb("segment", cmd_segment, "segment every image; write region masks and regions.csv")
    p.add_argument("root")
    p.add_argument("--out", default="lesionlab-out")
    p.add_argument("--seed", type=_seed_point, action="append", metavar="X,Y",
                   help="manual seed point (repeatable); replaces automatic seeding")
    jobs(p)

    p = verb("seg-eval", cmd_seg_eval, "score segmentation against ground-truth masks")
    p.add_argument("root")
    p.add_argument("--out", default="lesionlab-out")
    jobs(p)

    p = verb("features", cmd_features, "extract 4182-value descriptors into features.csv")
    p.add_argument("root")
    p.add_argument("--out", default="lesionlab-out")
    jobs(p)

    p = verb("train", cmd_train, "train SVM and k-NN on all samples in features.csv")
    p.add_argument("features")
    p.add_argument("--out", default="model.llm")
    rng_seed(p)

    p = verb("predict", cmd_predict, "classify the lesions of new images")
    p.add_argument("model")
    p.add_argument("images", nargs="+")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--seed", type=_seed_point, action="append", metavar="X,Y",
                   help="manual seed point (repeatable)")

    p = verb("evaluate", cmd_evaluate, "repeated stratified-split trials on features.csv")
    p.add_argument("features")
    p.add_argument("--out", default="lesionlab-out")
    p.add_argument("--fractions", help="comma-separated training percentages")
    p.add_argument("--trials", type=int)
    rng_seed(p)
    jobs(p)

    p = verb("run-all", cmd_run_all, "segment, extract, evaluate and report in one go")
    p.add_argument("root")
    p.add_argument("--out", default="lesionlab-out")
    p.add_argument("--fractions", help="comma-separated training percentages")
    p.add_argument("--trials", type=int)
    rng_seed(p)
    jobs(p)

    p = verb("report", cmd_report, "print summary, per-class and accuracy tables from report.json")
    p.add_argument("dir")
    p.add_argument("--svg", action="store_true", help="also regenerate report.svg")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except LesionLabError as exc:
        print(f"pipeline error: {exc}", file=sys.stderr)
        return EXIT_PIPELINE
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
