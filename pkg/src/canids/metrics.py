"""Evaluation engine: confusion matrix, per-class precision/recall/F1,
one-vs-rest ROC curves with trapezoidal AUC, and repeated stratified
k-fold cross-validation.

Conventions: precision/recall with a zero denominator are 0; headline F1
and AUC are macro averages (micro also reported); ROC thresholds are the
distinct predicted scores plus +/- infinity sentinels, giving the exact
step curve.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .frames import ClassLabel
from .models import Model, ModelKind, train_model
from .pipeline import Dataset, apply_scaler, assemble_matrix, fit_scaler, smote_oversample

N_CLASSES = len(ClassLabel)


def confusion(y_true: np.ndarray, y_pred: np.ndarray, n_classes: int = N_CLASSES) -> np.ndarray:
    """Count matrix with rows = true class, columns = predicted class."""
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ValueError("y_true and y_pred lengths differ")
    if y_true.size and (
        y_true.min() < 0 or y_true.max() >= n_classes or y_pred.min() < 0 or y_pred.max() >= n_classes
    ):
        raise ValueError(f"label ordinal outside 0..{n_classes - 1}")
    cm = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(cm, (y_true, y_pred), 1)
    return cm


@dataclass
class ClassMetrics:
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    support: np.ndarray
    accuracy: float
    macro_f1: float
    micro_f1: float

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "micro_f1": self.micro_f1,
            "per_class": [
                {
                    "label": ClassLabel(c).display_name,
                    "precision": float(self.precision[c]),
                    "recall": float(self.recall[c]),
                    "f1": float(self.f1[c]),
                    "support": int(self.support[c]),
                }
                for c in range(len(self.precision))
            ],
        }


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    out = np.zeros_like(num, dtype=np.float64)
    nz = den > 0
    out[nz] = num[nz] / den[nz]
    return out


def class_metrics(cm: np.ndarray) -> ClassMetrics:
    cm = np.asarray(cm, dtype=np.float64)
    if cm.size == 0 or cm.sum() == 0:
        raise ValueError("empty confusion matrix")
    tp = np.diag(cm)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp
    precision = _safe_div(tp, tp + fp)
    recall = _safe_div(tp, tp + fn)
    f1 = _safe_div(2.0 * precision * recall, precision + recall)
    support = cm.sum(axis=1).astype(np.int64)
    accuracy = float(tp.sum() / cm.sum())
    micro_p = tp.sum() / max(tp.sum() + fp.sum(), 1e-300)
    micro_r = tp.sum() / max(tp.sum() + fn.sum(), 1e-300)
    micro_f1 = float(0.0 if micro_p + micro_r == 0 else 2 * micro_p * micro_r / (micro_p + micro_r))
    return ClassMetrics(
        precision, recall, f1, support, accuracy, float(f1.mean()), micro_f1
    )


@dataclass
class RocCurve:
    label: int
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float | None  # None when the class has no positives or no negatives


def binary_roc(y_bin: np.ndarray, scores: np.ndarray) -> tuple[np.ndarray, np.ndarray, float | None]:
    """Exact ROC step curve for one binary problem.

    Thresholds sweep the distinct scores (plus sentinels), accumulating tied
    scores jointly so ties produce diagonal segments; AUC by trapezoid.
    """
    y_bin = np.asarray(y_bin, dtype=bool)
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("non-finite scores")
    n_pos = int(y_bin.sum())
    n_neg = int(y_bin.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        return np.array([0.0, 1.0]), np.array([0.0, 1.0]), None
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    tps = np.cumsum(y_bin[order].astype(np.float64))
    fps = np.cumsum((~y_bin[order]).astype(np.float64))
    # keep only the last index of each tied-score run
    last_of_run = np.nonzero(np.diff(sorted_scores) != 0.0)[0]
    idx = np.concatenate([last_of_run, [scores.size - 1]])
    tpr = np.concatenate([[0.0], tps[idx] / n_pos])
    fpr = np.concatenate([[0.0], fps[idx] / n_neg])
    auc = float(np.trapezoid(tpr, fpr))
    return fpr, tpr, auc


def roc_auc_ovr(y_true: np.ndarray, proba: np.ndarray) -> tuple[list[RocCurve], float | None]:
    """One-vs-rest ROC per class; macro AUC over the defined classes."""
    y_true = np.asarray(y_true, dtype=np.int64)
    proba = np.asarray(proba, dtype=np.float64)
    curves = []
    defined = []
    for c in range(proba.shape[1]):
        fpr, tpr, auc = binary_roc(y_true == c, proba[:, c])
        curves.append(RocCurve(c, fpr, tpr, auc))
        if auc is not None:
            defined.append(auc)
    macro = float(np.mean(defined)) if defined else None
    return curves, macro


@dataclass
class CvResult:
    fold_scores: list[float]
    k: int
    repeats: int
    seed: int

    @property
    def mean(self) -> float:
        return float(np.mean(self.fold_scores))

    @property
    def stddev(self) -> float:
        return float(np.std(self.fold_scores))

    def to_dict(self) -> dict:
        return {
            "k": self.k,
            "repeats": self.repeats,
            "seed": self.seed,
            "fold_scores": [float(s) for s in self.fold_scores],
            "mean": self.mean,
            "stddev": self.stddev,
        }


def stratified_kfold_indices(
    y: np.ndarray, k: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Class-balanced fold assignment: per class, shuffled round-robin."""
    y = np.asarray(y, dtype=np.int64)
    assignment = np.empty(y.size, dtype=np.int64)
    for label in np.unique(y):
        rows = np.nonzero(y == label)[0]
        if rows.size < k:
            raise ValueError(f"class ordinal {label} has {rows.size} rows, fewer than K={k}")
        shuffled = rng.permutation(rows)
        assignment[shuffled] = np.arange(shuffled.size) % k
    return [np.nonzero(assignment == fold)[0] for fold in range(k)]


@dataclass
class ModelSpec:
    kind: ModelKind
    params: object | None = None


def cross_validate(
    spec: ModelSpec,
    dataset: Dataset,
    k: int = 3,
    repeats: int = 2,
    seed: int = 0,
    time_features: bool = True,
    smote_target: int | None = None,
    smote_k: int = 5,
) -> CvResult:
    """Repeated stratified K-fold accuracy with per-fold pipeline fitting.

    Scaler (and optional SMOTE) fit inside each training fold; scores are
    ordered by (repeat, fold) regardless of execution order.
    """
    if k < 2:
        raise ValueError("K must be >= 2")
    scores = []
    for repeat in range(repeats):
        rng = np.random.default_rng([seed, repeat])
        folds = stratified_kfold_indices(dataset.y, k, rng)
        for fold_idx, test_rows in enumerate(folds):
            train_rows = np.sort(
                np.concatenate([f for j, f in enumerate(folds) if j != fold_idx])
            )
            test_rows = np.sort(test_rows)
            train_ds = dataset.take(train_rows)
            test_ds = dataset.take(test_rows)
            if smote_target is not None:
                train_ds = smote_oversample(train_ds, k=smote_k, target=smote_target,
                                            seed=seed + repeat)
            X_train, y_train, columns = assemble_matrix(train_ds, time_features)
            X_test, y_test, _ = assemble_matrix(test_ds, time_features)
            scaler = fit_scaler(X_train, columns)
            model = train_model(spec.kind, apply_scaler(scaler, X_train), y_train, spec.params)
            pred = model.predict(apply_scaler(scaler, X_test))
            scores.append(float((pred == y_test).mean()))
            _ = (repeat, fold_idx)  # score order is (repeat, fold) by construction
    return CvResult(scores, k, repeats, seed)
