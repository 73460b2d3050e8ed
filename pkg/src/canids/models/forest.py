"""Random forest of Gini trees, plus the single-tree model wrapper.

Trees train on bootstrap samples with per-split random feature subsets.
Prediction is a majority vote over trees; class probabilities are vote
fractions.  Importances aggregate the trees' raw impurity decreases and
normalize to sum 1.
"""

from __future__ import annotations

import numpy as np

from .base import Model, ModelKind, ForestParams, N_CLASSES
from .tree import DecisionTree, TreeParams


def _tree_params(p: ForestParams, feature_fraction: float | None = None) -> TreeParams:
    return TreeParams(
        max_depth=p.max_depth,
        min_samples_split=p.min_samples_split,
        min_samples_leaf=p.min_samples_leaf,
        feature_fraction=feature_fraction if feature_fraction is not None else p.feature_fraction,
        seed=p.seed,
    )


class DecisionTreeModel(Model):
    """Single CART tree behind the uniform interface (building block)."""

    kind = ModelKind.DECISION_TREE

    def __init__(self, params: ForestParams | None = None):
        super().__init__()
        self.params = params or ForestParams(feature_fraction=1.0, bootstrap=False)
        self.tree: DecisionTree | None = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "DecisionTreeModel":
        self.tree = DecisionTree(_tree_params(self.params), N_CLASSES)
        self.tree.fit(X, y, np.random.default_rng(self.params.seed))
        self.train_meta.seed = self.params.seed
        self.train_meta.epochs_run = 1
        self.train_meta.final_loss = 0.0
        self._arity = X.shape[1]
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        self._check_arity(np.asarray(X), self._arity)
        return self.tree.predict_proba(X)

    def feature_importance(self) -> np.ndarray:
        return self.tree.feature_importance()

    def params_dict(self) -> dict:
        from .base import params_to_dict

        return params_to_dict(self.params)

    def state_dict(self) -> dict:
        return {"arity": self._arity, "tree": self.tree.to_dict()}

    def load_state(self, state: dict) -> None:
        self._arity = state["arity"]
        self.tree = DecisionTree.from_dict(state["tree"])


class RandomForestModel(Model):
    kind = ModelKind.RANDOM_FOREST

    def __init__(self, params: ForestParams | None = None):
        super().__init__()
        self.params = params or ForestParams()
        self.trees: list[DecisionTree] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "RandomForestModel":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n = X.shape[0]
        self._arity = X.shape[1]
        self.trees = []
        root = np.random.default_rng(self.params.seed)
        for t in range(self.params.n_trees):
            rng = np.random.default_rng([self.params.seed, t])
            if self.params.bootstrap:
                rows = rng.integers(0, n, size=n)
            else:
                rows = np.arange(n)
            tree = DecisionTree(_tree_params(self.params), N_CLASSES)
            tree.fit(X[rows], y[rows], rng)
            self.trees.append(tree)
        _ = root  # reserved; per-tree streams already decorrelate
        self.train_meta.seed = self.params.seed
        self.train_meta.epochs_run = self.params.n_trees
        self.train_meta.final_loss = 0.0
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        self._check_arity(np.asarray(X), self._arity)
        n = np.asarray(X).shape[0]
        votes = np.zeros((n, N_CLASSES), dtype=np.float64)
        for tree in self.trees:
            pred = tree.predict(X)
            votes[np.arange(n), pred] += 1.0
        return votes / len(self.trees)

    def feature_importance(self) -> np.ndarray:
        raw = np.zeros(self._arity, dtype=np.float64)
        for tree in self.trees:
            raw += tree.raw_importance
        total = raw.sum()
        return raw / total if total > 0 else raw

    def params_dict(self) -> dict:
        from .base import params_to_dict

        return params_to_dict(self.params)

    def state_dict(self) -> dict:
        return {"arity": self._arity, "trees": [t.to_dict() for t in self.trees]}

    def load_state(self, state: dict) -> None:
        self._arity = state["arity"]
        self.trees = [DecisionTree.from_dict(d) for d in state["trees"]]


def train_decision_tree(X, y, params: ForestParams | None = None) -> DecisionTreeModel:
    return DecisionTreeModel(params).fit(X, y)


def train_random_forest(X, y, params: ForestParams | None = None) -> RandomForestModel:
    return RandomForestModel(params).fit(X, y)
