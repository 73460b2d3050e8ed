"""Linear classifiers: multinomial (softmax) logistic regression with L2,
and a one-vs-one linear SVM trained by hinge-loss subgradient descent.

The SVM decomposes the 5-class problem into C(5,2)=10 pairwise machines.
Prediction is a majority vote; vote ties break on the summed signed
margins.  Class scores are normalized vote shares (with a bounded margin
term folded in so that argmax(proba) realizes the margin tie-break).
"""

from __future__ import annotations

from itertools import combinations

import numpy as np

from .base import (
    LinearSvmParams, LogRegParams, Model, ModelKind, N_CLASSES,
    check_finite_loss, cross_entropy, softmax, uniform_init,
)


def logreg_loss_grad(
    W: np.ndarray, b: np.ndarray, X: np.ndarray, Y: np.ndarray, C: float
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean cross-entropy + L2/(2 C n) penalty, with analytic gradients.

    The bias is unpenalized.  Exposed at module level so the gradients can
    be checked against finite differences.
    """
    n = X.shape[0]
    proba = softmax(X @ W + b)
    loss = cross_entropy(proba, Y) + float((W * W).sum()) / (2.0 * C * n)
    delta = (proba - Y) / n
    grad_W = X.T @ delta + W / (C * n)
    grad_b = delta.sum(axis=0)
    return loss, grad_W, grad_b


class LogRegModel(Model):
    kind = ModelKind.LOGREG

    def __init__(self, params: LogRegParams | None = None):
        super().__init__()
        self.params = params or LogRegParams()
        self.W: np.ndarray | None = None
        self.b: np.ndarray | None = None

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LogRegModel":
        p = self.params
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        n, d = X.shape
        self._arity = d
        Y = np.eye(N_CLASSES)[y]
        rng = np.random.default_rng(p.seed)
        self.W = uniform_init(rng, d, (d, N_CLASSES))
        self.b = np.zeros(N_CLASSES)
        loss = float("nan")
        for _ in range(p.epochs):
            order = rng.permutation(n)
            for start in range(0, n, p.batch_size):
                rows = order[start : start + p.batch_size]
                loss, gW, gb = logreg_loss_grad(self.W, self.b, X[rows], Y[rows], p.C)
                check_finite_loss(loss, "logreg")
                self.W -= p.learning_rate * gW
                self.b -= p.learning_rate * gb
        self.train_meta.seed = p.seed
        self.train_meta.epochs_run = p.epochs
        self.train_meta.final_loss = float(logreg_loss_grad(self.W, self.b, X, Y, p.C)[0])
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        self._check_arity(X, self._arity)
        return softmax(X @ self.W + self.b)

    def feature_importance(self) -> np.ndarray:
        """Mean absolute coefficient per input column, normalized to sum 1."""
        raw = np.abs(self.W).mean(axis=1)
        total = raw.sum()
        return raw / total if total > 0 else raw

    def params_dict(self) -> dict:
        from .base import params_to_dict

        return params_to_dict(self.params)

    def state_dict(self) -> dict:
        return {"arity": self._arity, "W": self.W.tolist(), "b": self.b.tolist()}

    def load_state(self, state: dict) -> None:
        self._arity = state["arity"]
        self.W = np.asarray(state["W"], dtype=np.float64)
        self.b = np.asarray(state["b"], dtype=np.float64)


def hinge_loss(w: np.ndarray, b: float, X: np.ndarray, s: np.ndarray, C: float) -> float:
    """Mean hinge loss + L2/(2 C n); s in {-1, +1}."""
    margins = 1.0 - s * (X @ w + b)
    return float(np.maximum(margins, 0.0).mean() + (w @ w) / (2.0 * C * X.shape[0]))


class LinearSvmModel(Model):
    kind = ModelKind.LINEAR_SVM

    def __init__(self, params: LinearSvmParams | None = None):
        super().__init__()
        self.params = params or LinearSvmParams()
        self.machines: dict[tuple[int, int], tuple[np.ndarray, float]] = {}
        self.class_pairs: list[tuple[int, int]] = list(combinations(range(N_CLASSES), 2))

    def _fit_pair(
        self, X: np.ndarray, s: np.ndarray, rng: np.random.Generator
    ) -> tuple[np.ndarray, float]:
        p = self.params
        n, d = X.shape
        w = uniform_init(rng, d, (d,))
        b = 0.0
        for epoch in range(p.epochs):
            lr = p.learning_rate / (1.0 + p.lr_decay * epoch)
            order = rng.permutation(n)
            for start in range(0, n, p.batch_size):
                rows = order[start : start + p.batch_size]
                Xb, sb = X[rows], s[rows]
                m = len(rows)
                active = sb * (Xb @ w + b) < 1.0
                grad_w = w / (p.C * n) - (sb[active, None] * Xb[active]).sum(axis=0) / m
                grad_b = -float(sb[active].sum()) / m
                w -= lr * grad_w
                b -= lr * grad_b
                if not np.all(np.isfinite(w)):
                    from .base import TrainingError

                    raise TrainingError("linear_svm: weights diverged")
        return w, b

    def fit(self, X: np.ndarray, y: np.ndarray) -> "LinearSvmModel":
        p = self.params
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self._arity = X.shape[1]
        self.machines = {}
        total_loss = 0.0
        for a, c in self.class_pairs:
            rows = np.nonzero((y == a) | (y == c))[0]
            rng = np.random.default_rng([p.seed, a, c])
            if rows.size == 0:
                # no data for this pair: neutral machine
                self.machines[(a, c)] = (np.zeros(X.shape[1]), 0.0)
                continue
            s = np.where(y[rows] == a, 1.0, -1.0)
            w, b = self._fit_pair(X[rows], s, rng)
            self.machines[(a, c)] = (w, b)
            total_loss += hinge_loss(w, b, X[rows], s, p.C)
        self.train_meta.seed = p.seed
        self.train_meta.epochs_run = p.epochs
        self.train_meta.final_loss = total_loss / len(self.class_pairs)
        return self

    def vote_and_margin(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-class vote counts and summed signed margins over the 10
        pairwise machines."""
        X = np.asarray(X, dtype=np.float64)
        n = X.shape[0]
        votes = np.zeros((n, N_CLASSES), dtype=np.float64)
        margins = np.zeros((n, N_CLASSES), dtype=np.float64)
        for (a, c), (w, b) in self.machines.items():
            score = X @ w + b  # positive favours class a
            win_a = score >= 0
            votes[win_a, a] += 1.0
            votes[~win_a, c] += 1.0
            margins[:, a] += score
            margins[:, c] -= score
        return votes, margins

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Normalized vote shares; a bounded sigmoid of the summed margins is
        folded in so ties in votes resolve by margin, never reordering
        classes whose vote counts differ."""
        self._check_arity(np.asarray(X), self._arity)
        votes, margins = self.vote_and_margin(X)
        score = votes + 1.0 / (1.0 + np.exp(-margins)) - 0.5
        score = score - score.min(axis=1, keepdims=True) + 1e-9
        return score / score.sum(axis=1, keepdims=True)

    def feature_importance(self) -> np.ndarray:
        """Mean absolute coefficient across the pairwise machines."""
        raw = np.zeros(self._arity, dtype=np.float64)
        for w, _ in self.machines.values():
            raw += np.abs(w)
        raw /= len(self.machines)
        total = raw.sum()
        return raw / total if total > 0 else raw

    def params_dict(self) -> dict:
        from .base import params_to_dict

        return params_to_dict(self.params)

    def state_dict(self) -> dict:
        return {
            "arity": self._arity,
            "machines": [
                {"pair": [a, c], "w": w.tolist(), "b": b}
                for (a, c), (w, b) in sorted(self.machines.items())
            ],
        }

    def load_state(self, state: dict) -> None:
        self._arity = state["arity"]
        self.machines = {
            tuple(m["pair"]): (np.asarray(m["w"], dtype=np.float64), float(m["b"]))
            for m in state["machines"]
        }


def train_logreg(X, y, params: LogRegParams | None = None) -> LogRegModel:
    return LogRegModel(params).fit(X, y)


def train_linear_svm(X, y, params: LinearSvmParams | None = None) -> LinearSvmModel:
    return LinearSvmModel(params).fit(X, y)
