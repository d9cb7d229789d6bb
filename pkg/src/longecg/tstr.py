"""Train-on-synthetic, test-on-real classification harness.

Beat sequences are cut into fixed-length windows whose concatenated
feature rows form one sample each. A small suite of deterministic
classifiers is trained on synthetic windows and scored on held-out real
windows, next to the same suite trained on real windows.
"""

from __future__ import annotations

import enum
import math
from fractions import Fraction
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import RandomSource
from .delineation import FeatureTrajectory
from .errors import EmptyTestSet, SingleClass, TooFewBeats, TooFewRows

ITERATIONS = 500
LEARNING_RATE = 0.1
SVM_L2 = 1e-3
TREE_DEPTH = 8
TREE_MIN_LEAF = 5
MIN_TRAIN_ROWS = 10


class Provenance(enum.Enum):
    REAL = "Real"
    SYNTHETIC = "Synthetic"


@dataclass(frozen=True)
class LabeledDataset:
    rows: np.ndarray  # (n, p)
    labels: np.ndarray  # 0 Normal, 1 Abnormal
    provenance: Provenance = Provenance.REAL

    def __post_init__(self):
        rows = np.atleast_2d(np.asarray(self.rows, dtype=float))
        labels = np.asarray(self.labels, dtype=np.int64).ravel()
        if rows.shape[0] != labels.shape[0]:
            raise ValueError("rows and labels are not aligned")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "provenance", Provenance(self.provenance))

    def __len__(self):
        return self.labels.shape[0]

    @property
    def usable(self) -> bool:
        """Whether the set can train a classifier (two classes, enough rows)."""
        return np.unique(self.labels).size == 2 and len(self) >= MIN_TRAIN_ROWS

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.rows[idx], self.labels[idx], self.provenance)

    def with_labels(self, labels) -> "LabeledDataset":
        return LabeledDataset(self.rows, labels, self.provenance)


def windows_to_dataset(source, window_beats: int = 5, provenance=Provenance.REAL,
                       rule: str = "any") -> LabeledDataset:
    """Cut a beat sequence into non-overlapping windows of ``window_beats``.

    ``source`` is a :class:`FeatureTrajectory` or a ``(rows, labels)``
    pair, where ``rows`` holds one feature vector or waveform per beat.
    Under the default ``"any"`` rule a window is Abnormal when any of its
    beats is; ``"majority"`` needs more than half. Trailing beats that do not
    fill a window are dropped.

    Raises
    ------
    TooFewBeats
        If there are fewer beats than one window needs.
    """
    if isinstance(source, FeatureTrajectory):
        rows, labels = source.values, source.labels
    else:
        rows, labels = source
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        rows = rows[:, None]
    labels = np.asarray(labels, dtype=np.int64)
    if window_beats < 1:
        raise ValueError("window_beats must be >= 1")
    n = rows.shape[0] // window_beats
    if n == 0:
        raise TooFewBeats(f"{rows.shape[0]} beats cannot fill a window of {window_beats}")
    used = n * window_beats
    x = rows[:used].reshape(n, window_beats * rows.shape[1])
    lab = labels[:used].reshape(n, window_beats)
    if rule == "any":
        y = lab.max(axis=1)
    elif rule == "majority":
        y = (lab.sum(axis=1) * 2 > window_beats).astype(np.int64)
    else:
        raise ValueError(f"unknown labeling rule {rule!r}")
    return LabeledDataset(x, y, provenance)


class ClassifierKind(enum.Enum):
    GAUSSIAN_NAIVE_BAYES = "GaussianNaiveBayes"
    LOGISTIC_REGRESSION = "LogisticRegression"
    DECISION_TREE = "DecisionTree"
    LINEAR_SVM = "LinearSVM"


@dataclass(frozen=True)
class ClassifierSpec:
    name: str
    kind: ClassifierKind
    balanced: bool = False


SUITE = (
    ClassifierSpec("Balanced SVM", ClassifierKind.LINEAR_SVM, balanced=True),
    ClassifierSpec("Decision Tree", ClassifierKind.DECISION_TREE),
    ClassifierSpec("Naive Bayes", ClassifierKind.GAUSSIAN_NAIVE_BAYES),
    ClassifierSpec("SVM", ClassifierKind.LINEAR_SVM),
    ClassifierSpec("Logistic Regression", ClassifierKind.LOGISTIC_REGRESSION),
)


def suite(names: Optional[Sequence[str]] = None) -> tuple:
    """Classifier specs by display name; all of them when ``names`` is None."""
    if names is None:
        return SUITE
    by_name = {s.name.lower(): s for s in SUITE}
    try:
        return tuple(by_name[n.strip().lower()] for n in names)
    except KeyError as e:
        raise ValueError(f"unknown classifier {e.args[0]!r}") from None


def class_weights(y, balanced: bool) -> np.ndarray:
    """Per-row weights ``n / (2 n_c)`` when balanced, else ones."""
    if not balanced:
        return np.ones(y.shape[0])
    counts = np.bincount(y, minlength=2).astype(float)
    return (y.shape[0] / (2.0 * counts))[y]


class _Standardizer:
    def __init__(self, x):
        self.mean = x.mean(axis=0)
        sd = x.std(axis=0)
        self.sd = np.where(sd > 0, sd, 1.0)

    def __call__(self, x):
        return (x - self.mean) / self.sd


class GaussianNB:
    def __init__(self, x, y):
        var_floor = 1e-9 * max(float(x.var(axis=0).max()), 1e-12)
        self.classes = np.unique(y)
        self.log_prior = np.log(np.array([np.mean(y == c) for c in self.classes]))
        self.mean = np.stack([x[y == c].mean(axis=0) for c in self.classes])
        self.var = np.stack([x[y == c].var(axis=0) for c in self.classes]) + var_floor

    def predict(self, x):
        x = np.atleast_2d(x)
        ll = -0.5 * (np.log(2 * np.pi * self.var)[None] + (x[:, None, :] - self.mean[None]) ** 2 / self.var[None])
        score = ll.sum(axis=2) + self.log_prior[None]
        return self.classes[np.argmax(score, axis=1)]


class _Linear:
    """Linear model trained by full-batch gradient descent on standardized inputs."""

    def __init__(self, x, y, weights, rng: RandomSource, loss: str):
        self.scale = _Standardizer(x)
        z = self.scale(x)
        gen = rng.generator
        w = gen.normal(0.0, 0.01, size=z.shape[1])
        b = 0.0
        s = 2.0 * y - 1.0
        total = weights.sum()
        for _ in range(ITERATIONS):
            m = z @ w + b
            if loss == "logistic":
                # d/dm of log(1 + exp(-s m)) is -s * sigmoid(-s m)
                g = -s * np.exp(-np.logaddexp(0.0, s * m))
                gw, gb = (weights * g) @ z / total, np.sum(weights * g) / total
            else:
                g = np.where(s * m < 1.0, -s, 0.0)
                gw = (weights * g) @ z / total + SVM_L2 * w
                gb = np.sum(weights * g) / total
            w = w - LEARNING_RATE * gw
            b = b - LEARNING_RATE * gb
        self.w, self.b = w, b

    def decision(self, x):
        return self.scale(np.atleast_2d(x)) @ self.w + self.b

    def predict(self, x):
        return (self.decision(x) > 0).astype(np.int64)


class DecisionTree:
    """CART tree on Gini impurity with axis-aligned midpoint splits."""

    def __init__(self, x, y, max_depth: int = TREE_DEPTH, min_leaf: int = TREE_MIN_LEAF):
        self.max_depth, self.min_leaf = max_depth, min_leaf
        self.root = self._grow(x, y, 0)

    @staticmethod
    def _leaf(y):
        counts = np.bincount(y, minlength=2)
        return ("leaf", int(np.argmax(counts)))

    def _grow(self, x, y, depth):
        n = y.shape[0]
        if depth >= self.max_depth or n < 2 * self.min_leaf or np.all(y == y[0]):
            return self._leaf(y)
        best = None
        parent = n * (1.0 - np.mean(y) ** 2 - (1.0 - np.mean(y)) ** 2)
        for j in range(x.shape[1]):
            order = np.argsort(x[:, j], kind="stable")
            xs, ys = x[order, j], y[order]
            left_pos = np.cumsum(ys)[:-1].astype(float)
            n_left = np.arange(1, n, dtype=float)
            n_right = n - n_left
            right_pos = ys.sum() - left_pos
            gini_l = n_left - (left_pos ** 2 + (n_left - left_pos) ** 2) / n_left
            gini_r = n_right - (right_pos ** 2 + (n_right - right_pos) ** 2) / n_right
            imp = gini_l + gini_r
            ok = (xs[1:] > xs[:-1]) & (n_left >= self.min_leaf) & (n_right >= self.min_leaf)
            if not ok.any():
                continue
            imp = np.where(ok, imp, np.inf)
            k = int(np.argmin(imp))
            if best is None or imp[k] < best[0] - 1e-12:
                best = (imp[k], j, 0.5 * (xs[k] + xs[k + 1]))
        if best is None or best[0] >= parent - 1e-12:
            return self._leaf(y)
        _, j, thr = best
        mask = x[:, j] <= thr
        return ("split", j, thr, self._grow(x[mask], y[mask], depth + 1),
                self._grow(x[~mask], y[~mask], depth + 1))

    def _one(self, row):
        node = self.root
        while node[0] == "split":
            node = node[3] if row[node[1]] <= node[2] else node[4]
        return node[1]

    def predict(self, x):
        return np.array([self._one(r) for r in np.atleast_2d(x)], dtype=np.int64)


def train(kind, train_set: LabeledDataset, seed: int = 0, balanced: bool = False):
    """Fit one classifier. ``kind`` is a :class:`ClassifierKind` or a spec.

    Raises
    ------
    SingleClass, TooFewRows
    """
    if isinstance(kind, ClassifierSpec):
        kind, balanced = kind.kind, kind.balanced
    kind = ClassifierKind(kind)
    x, y = train_set.rows, train_set.labels
    if np.unique(y).size < 2:
        raise SingleClass("training set has a single class")
    if len(train_set) < MIN_TRAIN_ROWS:
        raise TooFewRows(f"need at least {MIN_TRAIN_ROWS} training rows, got {len(train_set)}")
    if kind is ClassifierKind.GAUSSIAN_NAIVE_BAYES:
        return GaussianNB(x, y)
    if kind is ClassifierKind.DECISION_TREE:
        return DecisionTree(x, y)
    loss = "logistic" if kind is ClassifierKind.LOGISTIC_REGRESSION else "hinge"
    return _Linear(x, y, class_weights(y, balanced), RandomSource(seed), loss)


def _ratio(a, b, exact=False):
    if exact:
        return Fraction(int(a), int(b)) if b else Fraction(0)
    return int(a) / int(b) if b else 0.0


@dataclass(frozen=True)
class ClassReport:
    """Binary scores from a confusion matrix ``[[TN, FP], [FN, TP]]``.

    Rows are true labels and columns predictions, Normal first; Abnormal is
    the positive class for MCC.
    """

    confusion: np.ndarray

    @classmethod
    def from_predictions(cls, y_true, y_pred) -> "ClassReport":
        cm = np.zeros((2, 2), dtype=np.int64)
        np.add.at(cm, (np.asarray(y_true, np.int64), np.asarray(y_pred, np.int64)), 1)
        return cls(cm)

    def precision(self, c: int, exact: bool = False):
        """Pass ``exact=True`` for a :class:`~fractions.Fraction` instead of a float."""
        return _ratio(self.confusion[c, c], self.confusion[:, c].sum(), exact)

    def recall(self, c: int, exact: bool = False):
        return _ratio(self.confusion[c, c], self.confusion[c, :].sum(), exact)

    def class_accuracy(self, c: int, exact: bool = False):
        return self.recall(c, exact)

    def f1(self, c: int, exact: bool = False):
        # 2 TP / (2 TP + FP + FN), the harmonic mean of precision and recall
        tp = self.confusion[c, c]
        den = self.confusion[:, c].sum() + self.confusion[c, :].sum()
        return _ratio(2 * tp, den, exact)

    def support(self, c: int) -> int:
        return int(self.confusion[c, :].sum())

    def accuracy_exact(self) -> Fraction:
        return _ratio(np.trace(self.confusion), self.confusion.sum(), True)

    @property
    def accuracy(self) -> float:
        return _ratio(np.trace(self.confusion), self.confusion.sum())

    @property
    def mcc(self) -> float:
        (tn, fp), (fn, tp) = self.confusion.tolist()
        den = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
        if den == 0:
            return 0.0
        return (tp * tn - fp * fn) / math.sqrt(den)

    def as_dict(self) -> dict:
        out = {}
        for key, fn in (("acc", self.class_accuracy), ("prec", self.precision),
                        ("rec", self.recall), ("f1", self.f1)):
            out[f"{key}_n"] = fn(0)
            out[f"{key}_a"] = fn(1)
        out["accuracy"] = self.accuracy
        out["mcc"] = self.mcc
        return out


def evaluate(model, test_set: LabeledDataset) -> ClassReport:
    if len(test_set) == 0:
        raise EmptyTestSet("test set is empty")
    return ClassReport.from_predictions(test_set.labels, model.predict(test_set.rows))


def stratified_split(ds: LabeledDataset, fraction: float = 0.7, seed: int = 0):
    """Seeded per-class split into ``(train, test)``.

    Two datasets with the same label vector are split identically.
    """
    gen = RandomSource(seed).generator
    train_idx, test_idx = [], []
    for c in (0, 1):
        idx = np.flatnonzero(ds.labels == c)
        idx = idx[gen.permutation(idx.size)]
        k = int(np.floor(fraction * idx.size + 0.5))
        train_idx.append(idx[:k])
        test_idx.append(idx[k:])
    tr, te = np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))
    return ds.subset(tr), ds.subset(te)


@dataclass(frozen=True)
class TstrRow:
    classifier: str
    protocol: str  # "TSTR" or "TRTR"
    report: ClassReport


TABLE_COLUMNS = ("acc_n", "acc_a", "prec_n", "prec_a", "rec_n", "rec_a",
                 "f1_n", "f1_a", "accuracy", "mcc")


def tstr_protocol(synth_train: LabeledDataset, real_test: LabeledDataset, kinds=SUITE,
                  seed: int = 0, split: float = 0.7) -> list:
    """Score every classifier trained on synthetic and on real windows.

    Both datasets are split with the same seeded stratified split. TSTR
    trains on the synthetic training part, TRTR on the real training part,
    and both are scored on the real held-out part.
    """
    s_train, _ = stratified_split(synth_train, split, seed)
    r_train, r_test = stratified_split(real_test, split, seed)
    rows = []
    for spec in kinds:
        for protocol, ds in (("TSTR", s_train), ("TRTR", r_train)):
            model = train(spec, ds, seed)
            rows.append(TstrRow(spec.name, protocol, evaluate(model, r_test)))
    return rows
