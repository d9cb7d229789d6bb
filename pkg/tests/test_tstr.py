import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from longecg.core import RandomSource
from longecg.delineation import FeatureTrajectory
from longecg.errors import EmptyTestSet, SingleClass, TooFewBeats, TooFewRows
from longecg.tstr import (
    SUITE, ClassifierKind, ClassReport, LabeledDataset, Provenance, class_weights, evaluate,
    stratified_split, suite, train, tstr_protocol, windows_to_dataset,
)


def _blobs(seed, n=400, sep=4.0, d=2):
    gen = np.random.default_rng(seed)
    y = np.arange(n) % 2
    x = gen.normal(size=(n, d))
    x[:, 0] += sep * y
    return LabeledDataset(x, y)


def test_windows_count_and_rule():
    rows = np.arange(10.0)[:, None]
    labels = [0] * 10
    labels[7] = 1
    ds = windows_to_dataset((rows, labels), 5)
    assert len(ds) == 2 and ds.rows.shape == (2, 5)
    assert ds.labels.tolist() == [0, 1]
    assert ds.rows[1].tolist() == [5, 6, 7, 8, 9]
    maj = windows_to_dataset((rows, labels), 5, rule="majority")
    assert maj.labels.tolist() == [0, 0]


def test_windows_from_trajectory():
    t = FeatureTrajectory(np.arange(24.0).reshape(12, 2), [0] * 12, ("a", "b"))
    ds = windows_to_dataset(t, 5, Provenance.SYNTHETIC)
    assert ds.rows.shape == (2, 10) and ds.provenance is Provenance.SYNTHETIC


def test_windows_single_class_flagged():
    ds = windows_to_dataset((np.zeros((50, 3)), [0] * 50), 5)
    assert not ds.usable
    with pytest.raises(SingleClass):
        train(ClassifierKind.LOGISTIC_REGRESSION, ds)


def test_windows_too_few():
    with pytest.raises(TooFewBeats):
        windows_to_dataset((np.zeros((4, 1)), [0] * 4), 5)


def test_too_few_rows():
    ds = LabeledDataset(np.arange(6.0)[:, None], [0, 1] * 3)
    with pytest.raises(TooFewRows):
        train(ClassifierKind.DECISION_TREE, ds)


def test_svm_separable_training_accuracy():
    ds = _blobs(1, sep=12.0)
    model = train(ClassifierKind.LINEAR_SVM, ds)
    assert evaluate(model, ds).accuracy == 1.0


def test_naive_bayes_boundary():
    gen = np.random.default_rng(2)
    n = 20000
    y = np.arange(n) % 2
    x = np.column_stack([gen.normal(size=n) + 2.0 * y, gen.normal(size=n)])
    model = train(ClassifierKind.GAUSSIAN_NAIVE_BAYES, LabeledDataset(x, y))
    grid = np.linspace(0, 2, 2001)
    pred = model.predict(np.column_stack([grid, np.zeros_like(grid)]))
    boundary = grid[np.argmax(pred == 1)]
    assert abs(boundary - 1.0) <= 0.1


@pytest.mark.parametrize("spec", SUITE, ids=lambda s: s.name)
def test_training_deterministic(spec):
    ds = _blobs(3, sep=1.0, d=4)
    a = train(spec, ds, seed=5).predict(ds.rows)
    b = train(spec, ds, seed=5).predict(ds.rows)
    assert np.array_equal(a, b)


@pytest.mark.parametrize("kind", [ClassifierKind.LINEAR_SVM, ClassifierKind.LOGISTIC_REGRESSION])
def test_balanced_equals_plain_when_balanced(kind):
    ds = _blobs(4, sep=1.0, d=3)
    assert np.all(class_weights(ds.labels, True) == 1.0)
    a = train(kind, ds, seed=1, balanced=True)
    b = train(kind, ds, seed=1, balanced=False)
    grid = np.random.default_rng(0).normal(size=(200, 3))
    assert np.array_equal(a.decision(grid), b.decision(grid))


def test_balanced_weights_sum():
    y = np.array([0] * 9 + [1])
    w = class_weights(y, True)
    assert w[y == 0].sum() == pytest.approx(w[y == 1].sum())


def test_report_perfect():
    r = ClassReport.from_predictions([0, 1, 1, 0], [0, 1, 1, 0])
    assert all(v == 1.0 for v in r.as_dict().values())


def test_report_hand_example():
    # TP=4, FN=1, FP=2, TN=3 with Abnormal positive
    r = ClassReport(np.array([[3, 2], [1, 4]]))
    assert r.precision(1, exact=True) == Fraction(4, 6)
    assert r.recall(1, exact=True) == Fraction(4, 5)
    assert r.f1(1) == pytest.approx(0.7273, abs=1e-4)
    assert r.mcc == pytest.approx(0.4082, abs=1e-4)


def test_report_constant_predictor():
    r = ClassReport.from_predictions([0, 1] * 10, [1] * 20)
    assert r.mcc == 0.0 and r.precision(0) == 0.0


@given(st.lists(st.integers(0, 1), min_size=1, max_size=60), st.data())
def test_report_ranges(y_true, data):
    y_pred = data.draw(st.lists(st.integers(0, 1), min_size=len(y_true), max_size=len(y_true)))
    r = ClassReport.from_predictions(y_true, y_pred)
    d = r.as_dict()
    assert all(0 <= v <= 1 for k, v in d.items() if k != "mcc")
    assert -1 <= d["mcc"] <= 1
    assert sum(r.recall(c, exact=True) * r.support(c) for c in (0, 1)) == np.trace(r.confusion)
    assert r.accuracy_exact() == Fraction(int(np.trace(r.confusion)), len(y_true))
    assert d["acc_n"] == d["rec_n"] and d["acc_a"] == d["rec_a"]
    (tn, fp), (fn, tp) = r.confusion.tolist()
    assert r.mcc == oracles.mcc_reference(tp, tn, fp, fn)


def test_evaluate_empty():
    model = train(ClassifierKind.GAUSSIAN_NAIVE_BAYES, _blobs(5))
    with pytest.raises(EmptyTestSet):
        evaluate(model, LabeledDataset(np.zeros((0, 2)), []))


def test_split_stratified_and_seeded():
    ds = _blobs(6, n=100)
    tr, te = stratified_split(ds, 0.7, 3)
    assert len(tr) == 70 and len(te) == 30
    assert tr.labels.sum() == 35
    tr2, _ = stratified_split(ds, 0.7, 3)
    assert np.array_equal(tr.rows, tr2.rows)


def test_protocol_leak_equals_trtr():
    ds = _blobs(7, sep=1.5, d=3)
    rows = tstr_protocol(ds, ds, SUITE, seed=2)
    assert [r.protocol for r in rows[:2]] == ["TSTR", "TRTR"]
    assert len(rows) == 2 * len(SUITE)
    for a, b in zip(rows[::2], rows[1::2]):
        assert a.classifier == b.classifier
        assert np.array_equal(a.report.confusion, b.report.confusion)


def test_protocol_separable_recall():
    rows = tstr_protocol(_blobs(8, sep=8.0), _blobs(9, sep=8.0), SUITE, seed=0)
    assert all(r.report.recall(c) >= 0.9 for r in rows for c in (0, 1))


def test_suite_lookup():
    assert [s.name for s in suite(["svm", " Naive Bayes"])] == ["SVM", "Naive Bayes"]
    assert suite() == SUITE
    with pytest.raises(ValueError):
        suite(["random forest"])


def test_linear_init_uses_seed():
    ds = _blobs(10, sep=0.5, d=5)
    a = train(ClassifierKind.LOGISTIC_REGRESSION, ds, seed=1).decision(ds.rows)
    b = train(ClassifierKind.LOGISTIC_REGRESSION, ds, seed=2).decision(ds.rows)
    assert not np.array_equal(a, b)
    assert math.isfinite(float(a.sum()))
    assert RandomSource(1).seed == 1
