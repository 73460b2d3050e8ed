"""Single-layer LSTM with a softmax head, trained by backpropagation
through time over fixed-length windows.

Inputs are sliding windows of consecutive feature rows (stride 1); the
window label is the last row's label.  The first rows of a stream are
front-padded with copies of the first row so every row gets a window.
Gate layout in the stacked weight matrices is [input, forget, output,
candidate].
"""

from __future__ import annotations

import numpy as np

from .base import (
    LstmParams, Model, ModelKind, N_CLASSES,
    check_finite_loss, cross_entropy, softmax, uniform_init,
)


def make_windows(X: np.ndarray, sequence_length: int) -> np.ndarray:
    """(n, d) -> (n, L, d) sliding windows, front-padded with row 0."""
    X = np.asarray(X, dtype=np.float64)
    if sequence_length < 1:
        raise ValueError("sequence_length must be >= 1")
    n = X.shape[0]
    if n == 0:
        return np.empty((0, sequence_length, X.shape[1]))
    pad = np.repeat(X[:1], sequence_length - 1, axis=0)
    padded = np.vstack([pad, X])
    view = np.lib.stride_tricks.sliding_window_view(padded, sequence_length, axis=0)
    return np.ascontiguousarray(np.swapaxes(view, 1, 2))  # (n, L, d)


def init_lstm_params(d_in: int, hidden: int, rng: np.random.Generator) -> dict[str, np.ndarray]:
    fan = d_in + hidden
    return {
        "Wx": uniform_init(rng, fan, (d_in, 4 * hidden)),
        "Wh": uniform_init(rng, fan, (hidden, 4 * hidden)),
        "b": np.zeros(4 * hidden),
        "Wy": uniform_init(rng, hidden, (hidden, N_CLASSES)),
        "by": np.zeros(N_CLASSES),
    }


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-z))


def lstm_forward(params: dict[str, np.ndarray], X: np.ndarray) -> tuple[np.ndarray, dict]:
    """Run the recurrence over X (batch, T, d); probabilities from the last
    hidden state.  The cache holds everything the backward pass needs."""
    B, T, _ = X.shape
    H = params["Wh"].shape[0]
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    cache = {"X": X, "i": [], "f": [], "o": [], "g": [], "c": [], "h": [], "c_prev": [], "h_prev": []}
    for t in range(T):
        gates = X[:, t, :] @ params["Wx"] + h @ params["Wh"] + params["b"]
        i = _sigmoid(gates[:, :H])
        f = _sigmoid(gates[:, H : 2 * H])
        o = _sigmoid(gates[:, 2 * H : 3 * H])
        g = np.tanh(gates[:, 3 * H :])
        cache["c_prev"].append(c)
        cache["h_prev"].append(h)
        c = f * c + i * g
        h = o * np.tanh(c)
        for key, val in (("i", i), ("f", f), ("o", o), ("g", g), ("c", c), ("h", h)):
            cache[key].append(val)
    proba = softmax(h @ params["Wy"] + params["by"])
    return proba, cache


def lstm_loss_and_grads(
    params: dict[str, np.ndarray], X: np.ndarray, Y: np.ndarray
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over the batch and gradients for all parameters."""
    B, T, _ = X.shape
    H = params["Wh"].shape[0]
    proba, cache = lstm_forward(params, X)
    loss = cross_entropy(proba, Y)

    grads = {k: np.zeros_like(v) for k, v in params.items()}
    delta = (proba - Y) / B
    grads["Wy"] = cache["h"][-1].T @ delta
    grads["by"] = delta.sum(axis=0)

    dh = delta @ params["Wy"].T
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        i, f, o, g = cache["i"][t], cache["f"][t], cache["o"][t], cache["g"][t]
        c, c_prev, h_prev = cache["c"][t], cache["c_prev"][t], cache["h_prev"][t]
        tanh_c = np.tanh(c)
        do = dh * tanh_c
        dc = dc + dh * o * (1.0 - tanh_c * tanh_c)
        di = dc * g
        dg = dc * i
        df = dc * c_prev
        dc = dc * f
        d_gates = np.concatenate(
            [di * i * (1 - i), df * f * (1 - f), do * o * (1 - o), dg * (1 - g * g)], axis=1
        )
        grads["Wx"] += cache["X"][:, t, :].T @ d_gates
        grads["Wh"] += h_prev.T @ d_gates
        grads["b"] += d_gates.sum(axis=0)
        dh = d_gates @ params["Wh"].T
    return loss, grads


class LstmModel(Model):
    kind = ModelKind.LSTM

    def __init__(self, params: LstmParams | None = None):
        super().__init__()
        self.params = params or LstmParams()
        self.weights: dict[str, np.ndarray] = {}

    def fit(self, X_sequences: np.ndarray, Y: np.ndarray) -> "LstmModel":
        """Train on windowed input (n, L, d); Y one-hot or ordinal."""
        p = self.params
        X = np.asarray(X_sequences, dtype=np.float64)
        if X.ndim != 3:
            raise ValueError("LSTM expects windowed input of shape (n, L, d)")
        Y = np.asarray(Y, dtype=np.float64)
        if Y.ndim == 1:
            Y = np.eye(N_CLASSES)[Y.astype(np.int64)]
        n, _, d = X.shape
        self._arity = d
        rng = np.random.default_rng(p.seed)
        self.weights = init_lstm_params(d, p.hidden, rng)
        loss = float("nan")
        for _ in range(p.epochs):
            order = rng.permutation(n)
            for start in range(0, n, p.batch_size):
                rows = order[start : start + p.batch_size]
                loss, grads = lstm_loss_and_grads(self.weights, X[rows], Y[rows])
                check_finite_loss(loss, "lstm")
                norm = np.sqrt(sum(float((g * g).sum()) for g in grads.values()))
                scale = p.clip / norm if norm > p.clip else 1.0
                for key in self.weights:
                    self.weights[key] -= p.learning_rate * scale * grads[key]
        self.train_meta.seed = p.seed
        self.train_meta.epochs_run = p.epochs
        self.train_meta.final_loss = float(loss)
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        """Accepts windowed (n, L, d) input or a flat (n, d) matrix, which is
        windowed over row order with front padding."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 2:
            X = make_windows(X, self.params.sequence_length)
        self._check_arity(X, self._arity)
        out = np.empty((X.shape[0], N_CLASSES))
        step = 4096  # bounded memory on long streams
        for start in range(0, X.shape[0], step):
            out[start : start + step], _ = lstm_forward(self.weights, X[start : start + step])
        return out

    def params_dict(self) -> dict:
        from .base import params_to_dict

        return params_to_dict(self.params)

    def state_dict(self) -> dict:
        return {"arity": self._arity, "weights": {k: v.tolist() for k, v in self.weights.items()}}

    def load_state(self, state: dict) -> None:
        self._arity = state["arity"]
        self.weights = {k: np.asarray(v, dtype=np.float64) for k, v in state["weights"].items()}


def train_lstm(X_sequences, Y_onehot, params: LstmParams | None = None) -> LstmModel:
    return LstmModel(params).fit(X_sequences, Y_onehot)
