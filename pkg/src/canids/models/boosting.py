"""Gradient-boosted regression trees with a multi-class softmax objective.

Each round fits one regression tree per class to the softmax gradients and
hessians.  Leaf values take a second-order step with L2 (lambda) shrinkage
and L1 (alpha) soft-thresholding; split gain is the standard second-order
score improvement.  Optional per-round row subsampling gives the stochastic
variant.
"""

from __future__ import annotations

import numpy as np

from .base import (
    GradBoostParams, Model, ModelKind, N_CLASSES,
    check_finite_loss, cross_entropy, softmax,
)


def _soft_threshold(g: float, alpha: float) -> float:
    if g > alpha:
        return g - alpha
    if g < -alpha:
        return g + alpha
    return 0.0


class _RegTree:
    """Second-order regression tree on (gradient, hessian) targets."""

    __slots__ = ("feature", "threshold", "left", "right", "value", "gain_by_feature")

    def __init__(self):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float | None] = []
        self.gain_by_feature: np.ndarray | None = None

    def _new_node(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(None)
        return len(self.feature) - 1

    @staticmethod
    def _leaf_value(G: float, H: float, p: GradBoostParams) -> float:
        return -_soft_threshold(G, p.reg_alpha) / (H + p.reg_lambda)

    @staticmethod
    def _score(G: np.ndarray, H: np.ndarray, p: GradBoostParams) -> np.ndarray:
        Gt = np.sign(G) * np.maximum(np.abs(G) - p.reg_alpha, 0.0)
        return Gt * Gt / (H + p.reg_lambda)

    def fit(self, X: np.ndarray, g: np.ndarray, h: np.ndarray, p: GradBoostParams) -> "_RegTree":
        n, d = X.shape
        self.gain_by_feature = np.zeros(d, dtype=np.float64)
        stack = [(self._new_node(), np.arange(n), 0)]
        while stack:
            node, idx, depth = stack.pop()
            G = float(g[idx].sum())
            H = float(h[idx].sum())
            if depth >= p.max_depth or idx.size < 2 or H <= p.min_child_hess:
                self.value[node] = self._leaf_value(G, H, p)
                continue
            parent_score = float(self._score(np.array(G), np.array(H), p))
            best = None  # (gain, feature, threshold)
            for f in range(d):
                v = X[idx, f]
                order = np.argsort(v, kind="stable")
                vs = v[order]
                if vs[0] == vs[-1]:
                    continue
                gc = np.cumsum(g[idx][order])
                hc = np.cumsum(h[idx][order])
                cut = np.nonzero(vs[1:] > vs[:-1])[0]
                if cut.size == 0:
                    continue
                GL, HL = gc[cut], hc[cut]
                GR, HR = G - GL, H - HL
                valid = (HL > p.min_child_hess) & (HR > p.min_child_hess)
                if not np.any(valid):
                    continue
                cut, GL, HL, GR, HR = cut[valid], GL[valid], HL[valid], GR[valid], HR[valid]
                gain = 0.5 * (self._score(GL, HL, p) + self._score(GR, HR, p) - parent_score)
                j = int(np.argmax(gain))
                if gain[j] <= 1e-12:
                    continue
                if best is None or gain[j] > best[0] + 1e-15:
                    best = (float(gain[j]), f, float((vs[cut[j]] + vs[cut[j] + 1]) / 2.0))
            if best is None:
                self.value[node] = self._leaf_value(G, H, p)
                continue
            gain, f, t = best
            self.gain_by_feature[f] += gain
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

    def predict(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        out = np.zeros(n, dtype=np.float64)
        stack = [(0, np.arange(n))]
        while stack:
            node, idx = stack.pop()
            if idx.size == 0:
                continue
            if self.value[node] is not None:
                out[idx] = self.value[node]
                continue
            go_left = X[idx, self.feature[node]] <= self.threshold[node]
            stack.append((self.left[node], idx[go_left]))
            stack.append((self.right[node], idx[~go_left]))
        return out

    def to_dict(self) -> dict:
        return {
            "feature": self.feature,
            "threshold": self.threshold,
            "left": self.left,
            "right": self.right,
            "value": self.value,
            "gain_by_feature": self.gain_by_feature.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "_RegTree":
        tree = cls()
        tree.feature = list(d["feature"])
        tree.threshold = [float(t) for t in d["threshold"]]
        tree.left = list(d["left"])
        tree.right = list(d["right"])
        tree.value = [None if v is None else float(v) for v in d["value"]]
        tree.gain_by_feature = np.asarray(d["gain_by_feature"], dtype=np.float64)
        return tree


class GradBoostModel(Model):
    kind = ModelKind.GRAD_BOOST

    def __init__(self, params: GradBoostParams | None = None):
        super().__init__()
        self.params = params or GradBoostParams()
        self.trees: list[list[_RegTree]] = []  # [round][class]
        self.loss_curve: list[float] = []

    def fit(self, X: np.ndarray, y: np.ndarray) -> "GradBoostModel":
        p = self.params
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n, d = X.shape
        self._arity = d
        Y = np.eye(N_CLASSES)[y]
        F = np.zeros((n, N_CLASSES), dtype=np.float64)
        rng = np.random.default_rng(p.seed)
        self.trees = []
        self.loss_curve = []
        for _ in range(p.rounds):
            proba = softmax(F)
            grad = proba - Y
            hess = np.maximum(proba * (1.0 - proba), 1e-12)
            if not np.all(np.isfinite(grad)):
                raise ValueError("non-finite gradients during boosting")
            if p.row_subsample < 1.0:
                rows = rng.random(n) < p.row_subsample
                if not np.any(rows):
                    rows = np.ones(n, dtype=bool)
            else:
                rows = slice(None)
            Xs = X[rows]
            round_trees = []
            for c in range(N_CLASSES):
                tree = _RegTree().fit(Xs, grad[rows, c], hess[rows, c], p)
                F[:, c] += p.learning_rate * tree.predict(X)
                round_trees.append(tree)
            self.trees.append(round_trees)
            loss = cross_entropy(softmax(F), Y)
            check_finite_loss(loss, "grad_boost")
            self.loss_curve.append(loss)
        self.train_meta.seed = p.seed
        self.train_meta.epochs_run = p.rounds
        self.train_meta.final_loss = self.loss_curve[-1]
        return self

    def decision_scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        F = np.zeros((X.shape[0], N_CLASSES), dtype=np.float64)
        for round_trees in self.trees:
            for c, tree in enumerate(round_trees):
                F[:, c] += self.params.learning_rate * tree.predict(X)
        return F

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        self._check_arity(np.asarray(X), self._arity)
        return softmax(self.decision_scores(X))

    def feature_importance(self) -> np.ndarray:
        """Total split gain per feature across all trees, normalized."""
        raw = np.zeros(self._arity, dtype=np.float64)
        for round_trees in self.trees:
            for tree in round_trees:
                raw += tree.gain_by_feature
        total = raw.sum()
        return raw / total if total > 0 else raw

    def params_dict(self) -> dict:
        from .base import params_to_dict

        return params_to_dict(self.params)

    def state_dict(self) -> dict:
        return {
            "arity": self._arity,
            "loss_curve": self.loss_curve,
            "trees": [[t.to_dict() for t in round_trees] for round_trees in self.trees],
        }

    def load_state(self, state: dict) -> None:
        self._arity = state["arity"]
        self.loss_curve = [float(x) for x in state["loss_curve"]]
        self.trees = [[_RegTree.from_dict(d) for d in round_trees] for round_trees in state["trees"]]


def train_gradboost(X, y, params: GradBoostParams | None = None) -> GradBoostModel:
    return GradBoostModel(params).fit(X, y)
