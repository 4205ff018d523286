import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import frozen
from lesionlab.errors import DataError, ParameterError
from lesionlab.evaluation import (
    REPORT_HEADER, ConfusionMatrix, TrialConfig, child_seed, classification_metrics, fmt, run_trials,
    seg_metrics, stratified_split, train_count, write_report,
)
from oracles import seg_counts

def random_pair(rng, shape=(12, 12)):
    S = rng.random(shape) < rng.uniform(0, 1)
    G = rng.random(shape) < rng.uniform(0.05, 1)
    G.flat[int(rng.integers(G.size))] = True
    return S, G


# --- segmentation ----------------------------------------------------------

def test_seg_perfect_and_total_miss():
    G = np.zeros((6, 6), bool)
    G[1:4, 2:5] = True
    assert seg_metrics(G, G).as_dict() == {"MOL": 1.0, "MUS": 0.0, "MOS": 0.0, "DSM": 1.0, "ER": 0.0}
    assert seg_metrics(np.zeros_like(G), G).as_dict() == {"MOL": 0.0, "MUS": 1.0, "MOS": 0.0, "DSM": 0.0, "ER": 1.0}


def test_seg_shifted_square():
    G = np.zeros((20, 20), bool)
    S = np.zeros((20, 20), bool)
    G[2:12, 2:12] = True
    S[2:12, 7:17] = True
    got = seg_metrics(S, G).as_dict()
    for k, v in frozen.SHIFTED_SQUARE.items():
        assert got[k] == pytest.approx(v, abs=1e-12)


def test_seg_against_counting_oracle_and_dice_identity():
    rng = np.random.default_rng(9)
    for _ in range(1000):
        S, G = random_pair(rng)
        m = seg_metrics(S, G)
        s, g, i = seg_counts(S, G)
        assert m.MOL == i / (s + g - i) and m.DSM == 2 * i / (s + g)
        assert m.MUS == (g - i) / g and m.MOS == (s - i) / g and m.ER == (s + g - 2 * i) / g
        assert abs(m.DSM - 2 * m.MOL / (1 + m.MOL)) <= 1e-9
        assert round(m.MUS * g) + i == g and m.MUS + i / g == pytest.approx(1.0, abs=1e-12)
        assert 0 <= m.MOL <= 1 and 0 <= m.DSM <= 1 and 0 <= m.MUS <= 1 and m.MOS >= 0 and m.ER >= 0


def test_seg_errors():
    with pytest.raises(ParameterError):
        seg_metrics(np.ones((3, 3), bool), np.zeros((3, 3), bool))
    with pytest.raises(ParameterError):
        seg_metrics(np.ones((3, 3), bool), np.ones((3, 4), bool))


# --- classification --------------------------------------------------------

def test_fixed_two_class_matrix():
    m = classification_metrics(ConfusionMatrix(np.array([[8, 2], [4, 6]])))
    assert round(m.precision[0], 4) == round(frozen.CM_PRECISION_0, 4)
    assert round(m.recall[0], 4) == round(frozen.CM_RECALL_0, 4)
    assert round(m.f_measure[0], 4) == round(frozen.CM_F_0, 4) == 0.7273
    assert round(m.accuracy, 4) == frozen.CM_ACCURACY
    # per-class one-vs-rest accuracy (TP + TN) / total equals the overall accuracy for two classes
    assert m.class_accuracy[0] == pytest.approx(frozen.CM_ACCURACY)


def test_perfect_classifier():
    m = classification_metrics(ConfusionMatrix(np.diag([3, 5, 2])))
    for arr in (m.precision, m.recall, m.f_measure, m.class_accuracy):
        assert np.all(arr == 1.0)
    assert m.accuracy == 1.0 and m.macro_f == 1.0 and not m.undefined


def test_undefined_ratios_flagged():
    m = classification_metrics(ConfusionMatrix(np.array([[4, 0], [1, 0]])))
    assert m.precision[1] == 0.0 and m.recall[1] == 0.0 and m.f_measure[1] == 0.0
    assert "precision[1]" in m.undefined and "recall[1]" not in m.undefined
    with pytest.raises(ParameterError):
        classification_metrics(ConfusionMatrix(np.zeros((2, 2))))
    with pytest.raises(ParameterError):
        ConfusionMatrix(np.array([[1, -1], [0, 0]]))


@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=40))
def test_confusion_properties(rows):
    t, s, k = map(np.array, zip(*rows))
    cm = ConfusionMatrix.from_predictions(t, s, 4)
    assert cm.counts.sum() == len(rows) and np.all(cm.counts >= 0)
    m = classification_metrics(cm)
    assert m.accuracy == np.trace(cm.counts) / cm.counts.sum()
    mf = classification_metrics(ConfusionMatrix.from_fused(t, s, k, 4))
    assert mf.accuracy >= max(m.accuracy, classification_metrics(ConfusionMatrix.from_predictions(t, k, 4)).accuracy)
    # correct sets only move counts from (truth, svm) onto the diagonal, so fused F never drops below SVM F
    assert np.all(mf.f_measure >= m.f_measure - 1e-12)


def test_fused_f_can_trail_knn_f():
    # both classifiers wrong on samples 0 and 2; the wrong sets land on svm's class 2, which has a true positive
    t, s, k = [0, 2, 0], [2, 1, 2], [1, 2, 1]
    fused = classification_metrics(ConfusionMatrix.from_fused(t, s, k, 3)).macro_f
    knn = classification_metrics(ConfusionMatrix.from_predictions(t, k, 3)).macro_f
    assert fused == pytest.approx(1 / 6) and knn == pytest.approx(1 / 3)


# --- trial protocol --------------------------------------------------------

def test_train_counts():
    assert train_count(33, 70) == 23 and 33 - train_count(33, 70) == 10
    assert train_count(20, 30) == 6
    assert train_count(2, 30) == 1 and train_count(2, 70) == 1
    assert train_count(10, 45) == 5  # half rounds up


def test_stratified_split_counts():
    y = np.repeat([0, 1, 2], [33, 20, 7])
    train, test = stratified_split(y, 70, np.random.default_rng(0))
    assert sorted(np.bincount(y[train]).tolist()) == sorted([23, 14, 5])
    assert np.bincount(y[test]).tolist() == [10, 6, 2]
    assert not set(train) & set(test) and len(train) + len(test) == len(y)
    with pytest.raises(DataError, match="'b'"):
        stratified_split(np.array([0, 0, 1]), 50, np.random.default_rng(0), classes=["a", "b"])


def test_child_seed_independent_of_other_cells():
    assert child_seed(0, 30, 1) == child_seed(0, 30, 1)
    assert len({child_seed(0, f, t) for f in (30, 40) for t in range(20)}) == 40
    assert child_seed(1, 30, 1) != child_seed(0, 30, 1)


def blobs(rng, n_per=(8, 7, 9), dim=6):
    X = np.vstack([rng.normal(3 * c, 1.0, (n, dim)) for c, n in enumerate(n_per)])
    y = np.repeat(np.arange(len(n_per)), n_per)
    return X, y


@pytest.fixture(scope="module")
def small_report():
    X, y = blobs(np.random.default_rng(0))
    config = TrialConfig(fractions=(30, 70), trials=3, seed=5, epochs=20)
    return X, y, config, run_trials(X, y, ["a", "b", "c"], config)


def test_report_shape(small_report):
    X, y, config, report = small_report
    assert [(r.fraction, r.trial) for r in report.results] == [(f, t) for f in (30, 70) for t in range(3)]
    for r in report.results:
        assert r.n_train + r.n_test == len(y)
        assert np.array_equal(r.confusion["svm"].counts.sum(axis=1),
                              [n - train_count(n, r.fraction) for n in np.bincount(y)])
    data = report.to_json()
    assert set(data["macro_f_by_fraction"]) == {"30", "70"} and set(data["macro_f_by_fraction"]["30"]) == {"svm", "knn", "fused"}
    assert set(data["f_by_class"]["fused"]) == {"a", "b", "c"}


def test_aggregates_are_exact(small_report):
    _, _, _, report = small_report
    values = {}
    for f, _, name, cname, metric, v in report.rows():
        values.setdefault((str(f), name, cname, metric), []).append(v)
    agg = report.aggregates()
    for (f, name, cname, metric), vs in values.items():
        cell = agg[f][name][cname][metric]
        assert cell["min"] == min(vs) and cell["max"] == max(vs) and cell["avg"] == float(np.mean(vs))
        assert cell["min"] <= cell["avg"] <= cell["max"]


def test_trials_deterministic_and_parallel_invariant(small_report, tmp_path):
    X, y, config, report = small_report
    again = run_trials(X, y, ["a", "b", "c"], config)
    par = run_trials(X, y, ["a", "b", "c"], config, jobs=2)
    for i, other in enumerate((again, par)):
        write_report(other, tmp_path / str(i))
    write_report(report, tmp_path / "ref")
    ref = (tmp_path / "ref" / "report.csv").read_bytes()
    assert (tmp_path / "0" / "report.csv").read_bytes() == ref == (tmp_path / "1" / "report.csv").read_bytes()
    assert (tmp_path / "1" / "report.json").read_bytes() == (tmp_path / "ref" / "report.json").read_bytes()
    assert ref.decode().splitlines()[0] == ",".join(REPORT_HEADER)
    assert b"\r" not in ref
    json.loads((tmp_path / "ref" / "report.json").read_text())
    assert (tmp_path / "ref" / "report.svg").read_text().startswith("<svg")


def test_adding_a_fraction_keeps_other_cells():
    X, y = blobs(np.random.default_rng(1))
    one = run_trials(X, y, ["a", "b", "c"], TrialConfig(fractions=(50,), trials=2, epochs=10))
    two = run_trials(X, y, ["a", "b", "c"], TrialConfig(fractions=(30, 50), trials=2, epochs=10))
    for a, b in zip(one.results, two.results[2:]):
        assert np.array_equal(a.confusion["svm"].counts, b.confusion["svm"].counts)


def test_trial_config_validation():
    with pytest.raises(ParameterError):
        TrialConfig(fractions=())
    with pytest.raises(ParameterError):
        TrialConfig(fractions=(100,))
    with pytest.raises(ParameterError):
        TrialConfig(trials=0)
    assert TrialConfig().fractions == (30, 40, 50, 60, 70) and TrialConfig().trials == 20


def test_fmt():
    assert fmt(0.123456789) == "0.123457"
    assert fmt(3) == "3" and fmt(3.0) == "3" and fmt(1e-7) == "1e-07"
