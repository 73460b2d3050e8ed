"""The classifier suite behind a uniform train/predict interface.

Six headline models (logistic regression, linear SVM, random forest,
gradient boosting, feed-forward net, LSTM) plus the decision tree they
build on.  ``train_model`` dispatches on kind, handling label widening for
the neural models and window construction for the LSTM.
"""

from __future__ import annotations

import numpy as np

from .base import (  # noqa: F401
    HEADLINE_KINDS, N_CLASSES, FeedForwardParams, ForestParams, GradBoostParams,
    LinearSvmParams, LogRegParams, LstmParams, Model, ModelKind, TrainMeta,
    TrainingError, params_from_dict, params_to_dict, softmax,
)
from .boosting import GradBoostModel, train_gradboost  # noqa: F401
from .forest import (  # noqa: F401
    DecisionTreeModel, RandomForestModel, train_decision_tree, train_random_forest,
)
from .io import ModelIOError, load_model, model_from_dict, model_to_dict, save_model  # noqa: F401
from .linear import LinearSvmModel, LogRegModel, train_linear_svm, train_logreg  # noqa: F401
from .lstm import LstmModel, make_windows, train_lstm  # noqa: F401
from .neural import FeedForwardModel, train_feedforward  # noqa: F401
from .tree import DecisionTree, TreeParams  # noqa: F401


def default_params(kind: ModelKind, seed: int = 0):
    from .base import PARAM_TYPES

    params = PARAM_TYPES[kind]()
    params.seed = seed
    if kind == ModelKind.DECISION_TREE:
        params.feature_fraction = 1.0
        params.bootstrap = False
    return params


def train_model(kind: ModelKind, X: np.ndarray, y: np.ndarray, params=None) -> Model:
    """Train any model kind on a flat (n, d) matrix and ordinal labels.

    The LSTM input is windowed over the given row order (the caller keeps
    rows in time order); neural targets are widened to one-hot here.
    """
    if params is None:
        params = default_params(kind)
    y = np.asarray(y, dtype=np.int64)
    if kind == ModelKind.LOGREG:
        return train_logreg(X, y, params)
    if kind == ModelKind.LINEAR_SVM:
        return train_linear_svm(X, y, params)
    if kind == ModelKind.DECISION_TREE:
        return train_decision_tree(X, y, params)
    if kind == ModelKind.RANDOM_FOREST:
        return train_random_forest(X, y, params)
    if kind == ModelKind.GRAD_BOOST:
        return train_gradboost(X, y, params)
    if kind == ModelKind.FEED_FORWARD:
        Y = np.eye(N_CLASSES)[y]
        return train_feedforward(X, Y, params)
    if kind == ModelKind.LSTM:
        windows = make_windows(np.asarray(X, dtype=np.float64), params.sequence_length)
        Y = np.eye(N_CLASSES)[y]
        if params.window_stride > 1:
            # subsampled training windows (the non-overlapping reshape
            # protocol when stride == sequence_length)
            start = min(params.sequence_length, len(windows)) - 1
            windows = windows[start :: params.window_stride]
            Y = Y[start :: params.window_stride]
        return train_lstm(windows, Y, params)
    raise ValueError(f"unknown model kind {kind!r}")


def predict_proba(model: Model, X: np.ndarray) -> np.ndarray:
    return model.predict_proba(X)


def predict(model: Model, X: np.ndarray) -> np.ndarray:
    return model.predict(X)


def feature_importance(model: Model, columns=None) -> list[tuple[str, float]]:
    """Ranked (column, weight) list; weights are non-negative and sum to 1."""
    weights = model.feature_importance()
    if columns is None:
        columns = model.columns or tuple(f"x{i}" for i in range(len(weights)))
    ranked = sorted(zip(columns, weights), key=lambda cw: -cw[1])
    return [(c, float(w)) for c, w in ranked]
