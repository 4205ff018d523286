import csv
import json

import numpy as np
import pytest

from lesionlab import cli
from lesionlab import pipeline as pl
from lesionlab.config import load_config
from lesionlab.dataset import ingest
from lesionlab.features import N_FEATURES

VERBS = ["fixtures", "ingest", "segment", "seg-eval", "features", "train", "predict", "evaluate",
         "run-all", "report"]
QUICK = ["--fractions", "50,70", "--trials", "2", "--set", "svm.epochs=20"]


@pytest.fixture(scope="module")
def run_dir(small_fixtures, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert cli.main(["run-all", str(small_fixtures), "--out", str(out), *QUICK]) == 0
    return out


@pytest.mark.parametrize("verb", VERBS)
def test_help_per_verb(verb, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main([verb, "--help"])
    assert exc.value.code == 0
    assert "usage: lesionlab " + verb in capsys.readouterr().out


def test_run_all_artifacts(run_dir, capsys):
    for name in ("regions.csv", "features.csv", "features.meta.json", "report.csv", "report.json",
                 "report.svg", "seg_report.csv", "seg_report.json", "seg_report.svg"):
        assert (run_dir / name).is_file(), name
    with open(run_dir / "regions.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == ["image", "region_id", "seed_x", "seed_y", "area", "bbox"]
    first = rows[0]
    label, stem = first["image"].split("/")
    assert (run_dir / "segments" / label / f"{stem}.region{first['region_id']}.png").is_file()
    report = json.loads((run_dir / "report.json").read_text())
    assert set(report["macro_f_by_fraction"]) == {"50", "70"}
    assert {(t["fraction"], t["trial"]) for t in report["trials"]} == {(50, 0), (50, 1), (70, 0), (70, 1)}
    meta = json.loads((run_dir / "features.meta.json").read_text())
    assert meta["layout"] == {"color": [0, 72], "texture": [72, 86], "histogram": [86, 4182]}
    assert len(meta["standardization"]["mean"]) == N_FEATURES


def test_fraction_filter(run_dir):
    with open(run_dir / "report.csv", newline="") as fh:
        fractions = {row["fraction"] for row in csv.DictReader(fh)}
    assert fractions == {"50", "70"}


def test_features_round_trip(small_fixtures, run_dir):
    samples, classes = pl.read_features(run_dir / "features.csv")
    assert classes == list(load_config().classes)
    results = pl.process_manifest(ingest(small_fixtures), load_config())
    fresh = pl.collect_samples(results)
    assert [(s.image_id, s.region_id) for s in samples] == [(s.image_id, s.region_id) for s in fresh]
    for a, b in zip(samples, fresh):
        np.testing.assert_allclose(a.features, b.features, rtol=1e-5, atol=1e-12)


def test_features_verb_and_evaluate(small_fixtures, tmp_path, capsys):
    assert cli.main(["features", str(small_fixtures), "--out", str(tmp_path)]) == 0
    assert cli.main(["evaluate", str(tmp_path / "features.csv"), "--out", str(tmp_path / "ev"), *QUICK]) == 0
    out = capsys.readouterr().out
    assert "SVM+k-NN" in out and (tmp_path / "ev" / "report.csv").is_file()


def test_train_and_predict(run_dir, small_fixtures, tmp_path, capsys):
    model = tmp_path / "m.llm"
    assert cli.main(["train", str(run_dir / "features.csv"), "--out", str(model), "--set", "svm.epochs=20"]) == 0
    image = sorted((small_fixtures / "shingles").glob("*.png"))[0]
    out_csv = tmp_path / "pred.csv"
    assert cli.main(["predict", str(model), str(image), "--out", str(out_csv)]) == 0
    with open(out_csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and rows[0]["label"] == rows[0]["svm"]
    assert set(rows[0]["fused"].split("|")) == {rows[0]["svm"], rows[0]["knn"]}
    capsys.readouterr()
    assert cli.main(["predict", str(model), str(image)]) == 0
    assert capsys.readouterr().out.startswith("image,region_id,label,svm,knn,fused\n")


def test_segment_with_manual_seed(small_fixtures, tmp_path):
    assert cli.main(["segment", str(small_fixtures), "--out", str(tmp_path), "--seed", "32,32"]) == 0
    with open(tmp_path / "regions.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows and all((r["seed_x"], r["seed_y"]) == ("32", "32") for r in rows)


def test_seg_eval_and_report(small_fixtures, run_dir, tmp_path, capsys):
    assert cli.main(["seg-eval", str(small_fixtures), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "DSM" in out and "melanoma" in out
    summary = json.loads((tmp_path / "seg_report.json").read_text())["class_means"]
    assert all(0.8 < v["DSM"] <= 1.0 for v in summary.values())
    assert cli.main(["report", str(run_dir)]) == 0
    out = capsys.readouterr().out
    assert "min / avg / max" in out and "squamous-cell" in out


def test_ingest_and_fixtures_verbs(tmp_path, capsys):
    assert cli.main(["fixtures", str(tmp_path / "fx"), "--per-class", "1", "--size", "48", "--seed", "2"]) == 0
    assert cli.main(["ingest", str(tmp_path / "fx"), "--out", str(tmp_path / "m.csv")]) == 0
    assert "total                    5" in capsys.readouterr().out
    assert len((tmp_path / "m.csv").read_text().splitlines()) == 6


def test_exit_codes(small_fixtures, tmp_path, capsys):
    assert cli.main(["ingest", str(small_fixtures), "--set", "nope=1"]) == 2
    assert cli.main(["ingest", str(small_fixtures), "--config", str(tmp_path / "missing.cfg")]) == 2
    assert cli.main(["ingest", str(tmp_path / "missing")]) == 3
    assert cli.main(["report", str(tmp_path)]) == 3
    one_class = tmp_path / "features.csv"
    header = ["image", "region_id", "class", *(f"f{i}" for i in range(N_FEATURES))]
    with open(one_class, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(3):
            w.writerow([f"a/{i}", 0, "a", *([0.5] * N_FEATURES)])
    assert cli.main(["train", str(one_class), "--out", str(tmp_path / "m.llm")]) == 4
    err = capsys.readouterr().err
    assert "config error" in err and "data error" in err and "pipeline error" in err
    with pytest.raises(SystemExit) as exc:
        cli.main(["segment", str(small_fixtures), "--seed", "oops"])
    assert exc.value.code == 2
