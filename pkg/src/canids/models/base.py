"""Shared model interface: kinds, hyperparameter bundles, training errors.

Every trained model exposes ``predict_proba`` (rows on the probability
simplex) and ``predict`` (argmax with lowest-ordinal tie-break, which
np.argmax provides).  Training is deterministic given (data, hyperparams,
seed); weights initialize uniform(-r, r) with r = 1/sqrt(fan_in) in double
precision.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from enum import Enum

import numpy as np

from ..frames import ClassLabel

N_CLASSES = len(ClassLabel)


class ModelKind(str, Enum):
    LOGREG = "logreg"
    LINEAR_SVM = "linear_svm"
    DECISION_TREE = "decision_tree"
    RANDOM_FOREST = "random_forest"
    GRAD_BOOST = "grad_boost"
    FEED_FORWARD = "feed_forward"
    LSTM = "lstm"


# the six headline classifiers; the plain decision tree is an internal
# building block exposed for testing
HEADLINE_KINDS = (
    ModelKind.LOGREG,
    ModelKind.LINEAR_SVM,
    ModelKind.RANDOM_FOREST,
    ModelKind.GRAD_BOOST,
    ModelKind.FEED_FORWARD,
    ModelKind.LSTM,
)


class TrainingError(RuntimeError):
    """Raised when optimization diverges (NaN loss, exploding loss)."""


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ValueError(message)


@dataclass
class LogRegParams:
    C: float = 1.0  # inverse L2 strength
    learning_rate: float = 0.3
    epochs: int = 60
    batch_size: int = 1024
    seed: int = 0

    def __post_init__(self):
        _require(self.C > 0, "C must be > 0")
        _require(self.learning_rate > 0, "learning_rate must be > 0")
        _require(self.epochs >= 1 and self.batch_size >= 1, "counts must be >= 1")


@dataclass
class LinearSvmParams:
    C: float = 1.0
    learning_rate: float = 0.1
    lr_decay: float = 0.3  # per-epoch: lr / (1 + decay * epoch)
    epochs: int = 30
    batch_size: int = 512
    seed: int = 0

    def __post_init__(self):
        _require(self.C > 0, "C must be > 0")
        _require(self.learning_rate > 0, "learning_rate must be > 0")
        _require(self.lr_decay >= 0, "lr_decay must be >= 0")
        _require(self.epochs >= 1 and self.batch_size >= 1, "counts must be >= 1")


@dataclass
class ForestParams:
    n_trees: int = 12
    max_depth: int = 14
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    feature_fraction: float = 0.34
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        _require(self.n_trees >= 1, "n_trees must be >= 1")
        _require(self.max_depth >= 1, "max_depth must be >= 1")
        _require(0 < self.feature_fraction <= 1, "feature_fraction must be in (0, 1]")


@dataclass
class GradBoostParams:
    rounds: int = 25
    learning_rate: float = 0.3
    max_depth: int = 4
    reg_lambda: float = 1.0  # L2 on leaf values
    reg_alpha: float = 0.0  # L1 on leaf values
    row_subsample: float = 0.7
    min_child_hess: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        _require(self.rounds >= 1, "rounds must be >= 1")
        _require(self.learning_rate > 0, "learning_rate must be > 0")
        _require(0 < self.row_subsample <= 1, "row_subsample must be in (0, 1]")
        _require(self.reg_lambda >= 0 and self.reg_alpha >= 0, "penalties must be >= 0")


@dataclass
class FeedForwardParams:
    hidden: tuple[int, ...] = (32, 16)
    activation: str = "relu"  # "relu" | "tanh"
    epochs: int = 12
    batch_size: int = 256
    learning_rate: float = 0.05
    seed: int = 0

    def __post_init__(self):
        _require(all(h >= 1 for h in self.hidden), "hidden widths must be >= 1")
        _require(self.activation in ("relu", "tanh"), "activation must be relu or tanh")
        _require(self.epochs >= 1 and self.batch_size >= 1, "counts must be >= 1")
        _require(self.learning_rate > 0, "learning_rate must be > 0")


@dataclass
class LstmParams:
    hidden: int = 16
    sequence_length: int = 16
    window_stride: int = 1  # training windows; prediction always slides
    epochs: int = 6
    batch_size: int = 128
    learning_rate: float = 0.4
    clip: float = 5.0  # gradient L2 clip per batch
    seed: int = 0

    def __post_init__(self):
        _require(self.hidden >= 1, "hidden must be >= 1")
        _require(self.sequence_length >= 1, "sequence_length must be >= 1")
        _require(self.window_stride >= 1, "window_stride must be >= 1")
        _require(self.epochs >= 1 and self.batch_size >= 1, "counts must be >= 1")
        _require(self.learning_rate > 0, "learning_rate must be > 0")


PARAM_TYPES = {
    ModelKind.LOGREG: LogRegParams,
    ModelKind.LINEAR_SVM: LinearSvmParams,
    ModelKind.DECISION_TREE: ForestParams,
    ModelKind.RANDOM_FOREST: ForestParams,
    ModelKind.GRAD_BOOST: GradBoostParams,
    ModelKind.FEED_FORWARD: FeedForwardParams,
    ModelKind.LSTM: LstmParams,
}


def params_to_dict(params) -> dict:
    d = asdict(params)
    for key, value in d.items():
        if isinstance(value, tuple):
            d[key] = list(value)
    return d


def params_from_dict(kind: ModelKind, d: dict):
    cls = PARAM_TYPES[kind]
    d = dict(d)
    if "hidden" in d and isinstance(d["hidden"], list):
        d["hidden"] = tuple(d["hidden"])
    return cls(**d)


@dataclass
class TrainMeta:
    seed: int = 0
    epochs_run: int = 0
    final_loss: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)


class Model:
    """Base class for the classifier suite."""

    kind: ModelKind

    def __init__(self):
        self.n_classes = N_CLASSES
        self.train_meta = TrainMeta()
        self.feature_mode: str | None = None  # "with_time" | "without_time"
        self.columns: tuple[str, ...] | None = None
        self.scaler: dict | None = None  # embedded ScalerParams dict

    # --- interface ---------------------------------------------------------
    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.argmax(self.predict_proba(X), axis=1)

    def feature_importance(self) -> np.ndarray:
        raise ValueError(f"{self.kind.value} does not define feature importances")

    # --- (de)serialization hooks -------------------------------------------
    def params_dict(self) -> dict:
        raise NotImplementedError

    def state_dict(self) -> dict:
        raise NotImplementedError

    def load_state(self, state: dict) -> None:
        raise NotImplementedError

    def _check_arity(self, X: np.ndarray, expected: int) -> None:
        if X.ndim < 2 or X.shape[-1] != expected:
            raise ValueError(f"input arity {X.shape} does not match training arity {expected}")


def uniform_init(rng: np.random.Generator, fan_in: int, shape: tuple[int, ...]) -> np.ndarray:
    r = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-r, r, size=shape)


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(proba: np.ndarray, Y: np.ndarray) -> float:
    """Mean cross-entropy against one-hot targets."""
    p = np.clip(proba, 1e-12, 1.0)
    return float(-(Y * np.log(p)).sum() / max(len(Y), 1))


def check_finite_loss(loss: float, context: str) -> None:
    if not np.isfinite(loss) or loss > 1e6:
        raise TrainingError(f"{context}: loss diverged ({loss})")
