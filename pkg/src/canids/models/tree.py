"""CART-style decision tree minimizing weighted Gini impurity.

Split candidates are midpoints between consecutive distinct values of each
feature; ties between candidate splits resolve to the first feature index
and lowest threshold, keeping training deterministic.  The tree records the
impurity decrease of each split for feature-importance extraction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class TreeParams:
    max_depth: int = 12
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    feature_fraction: float = 1.0  # per-split random feature subset
    seed: int = 0

    def __post_init__(self):
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if not 0 < self.feature_fraction <= 1:
            raise ValueError("feature_fraction must be in (0, 1]")


def _gini_from_counts(counts: np.ndarray, total: np.ndarray | float) -> np.ndarray:
    """Gini impurity for count vectors along the last axis."""
    total = np.asarray(total, dtype=np.float64)
    safe = np.where(total == 0, 1.0, total)
    p = counts / safe[..., None]
    return 1.0 - (p * p).sum(axis=-1)


def best_gini_split(
    X: np.ndarray, y: np.ndarray, idx: np.ndarray, features: np.ndarray,
    n_classes: int, min_leaf: int,
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, impurity_decrease) over the node rows.

    Returns None when no valid split exists.  The impurity decrease is
    node-local: gini(node) - weighted gini(children).
    """
    n = idx.size
    y_node = y[idx]
    counts = np.bincount(y_node, minlength=n_classes).astype(np.float64)
    parent_gini = float(_gini_from_counts(counts, float(n)))
    if parent_gini == 0.0:
        return None

    best = None  # (decrease, feature, threshold)
    for f in features:
        v = X[idx, f]
        order = np.argsort(v, kind="stable")
        vs = v[order]
        if vs[0] == vs[-1]:
            continue
        cls = y_node[order]
        one_hot = np.zeros((n, n_classes), dtype=np.float64)
        one_hot[np.arange(n), cls] = 1.0
        cum = np.cumsum(one_hot, axis=0)

        cut = np.nonzero(vs[1:] > vs[:-1])[0]  # split after position i
        if cut.size == 0:
            continue
        n_left = cut + 1
        n_right = n - n_left
        valid = (n_left >= min_leaf) & (n_right >= min_leaf)
        if not np.any(valid):
            continue
        cut, n_left, n_right = cut[valid], n_left[valid], n_right[valid]
        left_counts = cum[cut]
        right_counts = counts - left_counts
        gini_left = _gini_from_counts(left_counts, n_left.astype(np.float64))
        gini_right = _gini_from_counts(right_counts, n_right.astype(np.float64))
        weighted = (n_left * gini_left + n_right * gini_right) / n
        j = int(np.argmin(weighted))
        decrease = parent_gini - float(weighted[j])
        threshold = float((vs[cut[j]] + vs[cut[j] + 1]) / 2.0)
        if decrease <= 1e-12:
            continue
        if best is None or decrease > best[0] + 1e-15:
            best = (decrease, int(f), threshold)
    if best is None:
        return None
    return best[1], best[2], best[0]


class DecisionTree:
    """Greedy Gini tree over a dense float matrix.

    Nodes are stored as parallel arrays: internal nodes carry (feature,
    threshold, children); leaves carry class-probability vectors.
    """

    def __init__(self, params: TreeParams | None = None, n_classes: int = 5):
        self.params = params or TreeParams()
        self.n_classes = n_classes
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.proba: list[np.ndarray | None] = []
        self.raw_importance: np.ndarray | None = None
        self.n_samples_fit = 0

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.proba.append(None)
        return len(self.feature) - 1

    def fit(self, X: np.ndarray, y: np.ndarray, rng: np.random.Generator | None = None) -> "DecisionTree":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if rng is None:
            rng = np.random.default_rng(self.params.seed)
        n, d = X.shape
        self.n_samples_fit = n
        self.raw_importance = np.zeros(d, dtype=np.float64)
        m = max(1, int(round(self.params.feature_fraction * d)))

        stack = [(self._new_node(), np.arange(n), 0)]
        while stack:
            node, idx, depth = stack.pop()
            counts = np.bincount(y[idx], minlength=self.n_classes).astype(np.float64)
            if (
                depth >= self.params.max_depth
                or idx.size < self.params.min_samples_split
                or np.count_nonzero(counts) <= 1
            ):
                self.proba[node] = counts / counts.sum()
                continue
            if m < d:
                # sampled order also decides gain ties, spreading importance
                # across redundant features over the forest
                features = rng.choice(d, size=m, replace=False)
            else:
                features = np.arange(d)
            split = best_gini_split(X, y, idx, features, self.n_classes,
                                    self.params.min_samples_leaf)
            if split is None:
                self.proba[node] = counts / counts.sum()
                continue
            f, t, decrease = split
            self.raw_importance[f] += idx.size * decrease
            go_left = X[idx, f] <= t
            self.feature[node] = f
            self.threshold[node] = t
            left = self._new_node()
            right = self._new_node()
            self.left[node] = left
            self.right[node] = right
            stack.append((right, idx[~go_left], depth + 1))
            stack.append((left, idx[go_left], depth + 1))
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        n = X.shape[0]
        out = np.zeros((n, self.n_classes), dtype=np.float64)
        stack = [(0, np.arange(n))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            if self.proba[node] is not None:
                out[idx] = self.proba[node]
                continue
            go_left = X[idx, self.feature[node]] <= self.threshold[node]
            stack.append((self.left[node], idx[go_left]))
            stack.append((self.right[node], idx[~go_left]))
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def feature_importance(self) -> np.ndarray:
        """Impurity-decrease importance, normalized to sum 1 (zeros when the
        tree never split)."""
        total = self.raw_importance.sum()
        if total == 0:
            return np.zeros_like(self.raw_importance)
        return self.raw_importance / total

    def to_dict(self) -> dict:
        return {
            "n_classes": self.n_classes,
            "n_samples_fit": self.n_samples_fit,
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "proba": [None if p is None else p.tolist() for p in self.proba],
            "raw_importance": self.raw_importance.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict, params: TreeParams | None = None) -> "DecisionTree":
        tree = cls(params, d["n_classes"])
        tree.n_samples_fit = d["n_samples_fit"]
        tree.feature = list(d["feature"])
        tree.threshold = [float(t) for t in d["threshold"]]
        tree.left = list(d["left"])
        tree.right = list(d["right"])
        tree.proba = [None if p is None else np.asarray(p, dtype=np.float64) for p in d["proba"]]
        tree.raw_importance = np.asarray(d["raw_importance"], dtype=np.float64)
        return tree
