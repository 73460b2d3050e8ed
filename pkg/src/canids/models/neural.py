"""Dense feed-forward network trained by backprop + mini-batch SGD.

Default shape is two hidden layers with ReLU and a softmax output on
cross-entropy.  ``ff_loss_and_grads`` is the pure forward/backward pass
used both by training and by the finite-difference gradient checks.
"""

from __future__ import annotations

import numpy as np

from .base import (
    FeedForwardParams, Model, ModelKind, N_CLASSES,
    check_finite_loss, cross_entropy, softmax, uniform_init,
)


def init_ff_params(
    d_in: int, hidden: tuple[int, ...], d_out: int, rng: np.random.Generator
) -> list[tuple[np.ndarray, np.ndarray]]:
    sizes = [d_in, *hidden, d_out]
    return [
        (uniform_init(rng, sizes[i], (sizes[i], sizes[i + 1])), np.zeros(sizes[i + 1]))
        for i in range(len(sizes) - 1)
    ]


def _act(z: np.ndarray, kind: str) -> np.ndarray:
    return np.maximum(z, 0.0) if kind == "relu" else np.tanh(z)


def _act_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    return (z > 0).astype(np.float64) if kind == "relu" else 1.0 - a * a


def ff_forward(params: list[tuple[np.ndarray, np.ndarray]], X: np.ndarray, activation: str) -> np.ndarray:
    a = X
    for W, b in params[:-1]:
        a = _act(a @ W + b, activation)
    W, b = params[-1]
    return softmax(a @ W + b)


def ff_loss_and_grads(
    params: list[tuple[np.ndarray, np.ndarray]], X: np.ndarray, Y: np.ndarray, activation: str
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Mean cross-entropy and gradients for every (W, b)."""
    n = X.shape[0]
    acts = [X]
    zs = []
    a = X
    for W, b in params[:-1]:
        z = a @ W + b
        a = _act(z, activation)
        zs.append(z)
        acts.append(a)
    W, b = params[-1]
    proba = softmax(a @ W + b)
    loss = cross_entropy(proba, Y)

    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params)
    delta = (proba - Y) / n
    grads[-1] = (acts[-1].T @ delta, delta.sum(axis=0))
    for layer in range(len(params) - 2, -1, -1):
        delta = (delta @ params[layer + 1][0].T) * _act_grad(zs[layer], acts[layer + 1], activation)
        grads[layer] = (acts[layer].T @ delta, delta.sum(axis=0))
    return loss, grads


class FeedForwardModel(Model):
    kind = ModelKind.FEED_FORWARD

    def __init__(self, params: FeedForwardParams | None = None):
        super().__init__()
        self.params = params or FeedForwardParams()
        self.layers: list[tuple[np.ndarray, np.ndarray]] = []

    def fit(self, X: np.ndarray, Y: np.ndarray) -> "FeedForwardModel":
        """Train on one-hot targets Y (ordinal y is widened transparently)."""
        p = self.params
        X = np.asarray(X, dtype=np.float64)
        Y = np.asarray(Y, dtype=np.float64)
        if Y.ndim == 1:
            Y = np.eye(N_CLASSES)[Y.astype(np.int64)]
        n, d = X.shape
        self._arity = d
        rng = np.random.default_rng(p.seed)
        self.layers = init_ff_params(d, p.hidden, N_CLASSES, rng)
        loss = float("nan")
        for _ in range(p.epochs):
            order = rng.permutation(n)
            for start in range(0, n, p.batch_size):
                rows = order[start : start + p.batch_size]
                loss, grads = ff_loss_and_grads(self.layers, X[rows], Y[rows], p.activation)
                check_finite_loss(loss, "feed_forward")
                self.layers = [
                    (W - p.learning_rate * gW, b - p.learning_rate * gb)
                    for (W, b), (gW, gb) in zip(self.layers, grads)
                ]
        self.train_meta.seed = p.seed
        self.train_meta.epochs_run = p.epochs
        self.train_meta.final_loss = float(
            cross_entropy(ff_forward(self.layers, X, p.activation), Y)
        )
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        self._check_arity(X, self._arity)
        return ff_forward(self.layers, X, self.params.activation)

    def params_dict(self) -> dict:
        from .base import params_to_dict

        return params_to_dict(self.params)

    def state_dict(self) -> dict:
        return {
            "arity": self._arity,
            "layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in self.layers],
        }

    def load_state(self, state: dict) -> None:
        self._arity = state["arity"]
        self.layers = [
            (np.asarray(l["W"], dtype=np.float64), np.asarray(l["b"], dtype=np.float64))
            for l in state["layers"]
        ]


def train_feedforward(X, Y_onehot, params: FeedForwardParams | None = None) -> FeedForwardModel:
    return FeedForwardModel(params).fit(X, Y_onehot)
