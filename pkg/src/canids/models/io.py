"""Model persistence: versioned, self-describing JSON documents.

A saved file carries the kind, hyperparameters, learned parameters,
training metadata, and (when the model came out of the training pipeline)
the feature mode, column names, and embedded scaler so the streaming
detector can run from a single file.  Loading reproduces bit-identical
predictions.
"""

from __future__ import annotations

import json

from .base import Model, ModelKind, TrainMeta, params_from_dict
from .boosting import GradBoostModel
from .forest import DecisionTreeModel, RandomForestModel
from .linear import LinearSvmModel, LogRegModel
from .lstm import LstmModel
from .neural import FeedForwardModel

SCHEMA_VERSION = "1"

MODEL_CLASSES = {
    ModelKind.LOGREG: LogRegModel,
    ModelKind.LINEAR_SVM: LinearSvmModel,
    ModelKind.DECISION_TREE: DecisionTreeModel,
    ModelKind.RANDOM_FOREST: RandomForestModel,
    ModelKind.GRAD_BOOST: GradBoostModel,
    ModelKind.FEED_FORWARD: FeedForwardModel,
    ModelKind.LSTM: LstmModel,
}


class ModelIOError(ValueError):
    """Corrupt, truncated, or incompatible model file."""


def model_to_dict(model: Model) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "kind": model.kind.value,
        "hyperparams": model.params_dict(),
        "train_meta": model.train_meta.to_dict(),
        "feature_mode": model.feature_mode,
        "columns": None if model.columns is None else list(model.columns),
        "scaler": model.scaler,
        "params": model.state_dict(),
    }


def model_from_dict(doc: dict) -> Model:
    if not isinstance(doc, dict) or "schema_version" not in doc:
        raise ModelIOError("not a model document")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ModelIOError(
            f"schema version {doc['schema_version']!r} unsupported (expected {SCHEMA_VERSION!r})"
        )
    try:
        kind = ModelKind(doc["kind"])
        cls = MODEL_CLASSES[kind]
        model = cls(params_from_dict(kind, doc["hyperparams"]))
        model.load_state(doc["params"])
        model.train_meta = TrainMeta(**doc.get("train_meta", {}))
        model.feature_mode = doc.get("feature_mode")
        columns = doc.get("columns")
        model.columns = None if columns is None else tuple(columns)
        model.scaler = doc.get("scaler")
    except ModelIOError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelIOError(f"malformed model document: {exc}") from exc
    return model


def save_model(model: Model, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path: str) -> Model:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelIOError(f"{path}: truncated or corrupt model file: {exc}") from exc
    return model_from_dict(doc)
