"""Preprocessing pipeline: frames -> numeric feature matrices.

The eight preparation stages are: cleaning, hex-to-numeric decoding (done at
parse time), timestamp expansion to calendar fields, derivation of the two
time-series columns (``at_freq_sec`` and ``hour``), optional SMOTE
oversampling, label encoding, standard scaling, and train/test splitting.

``at_freq_sec`` is the same-id inter-arrival gap: the time since the most
recent earlier frame carrying the same CAN id.  A first sighting gets the
sentinel 10.0 s, and longer gaps are clamped to the sentinel so that one
idle period cannot dominate the scaled column (gaps of interest live far
below it).  ``hour`` is the local wall-clock hour derived with a fixed,
configured UTC offset.

Feature matrix layout (fixed order):
    can_id, dlc, data0..data7, at_freq_sec, hour        (with time features)
    can_id, dlc, data0..data7                           (without)
Payload bytes past the DLC are imputed as 0; the dlc column preserves the
distinction.  Calendar fields other than hour never enter the matrix.
"""

from __future__ import annotations

import datetime as _dt
import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .frames import CanFrame, ClassLabel

log = logging.getLogger(__name__)

AT_FREQ_SENTINEL = 10.0  # seconds; first sighting of an id, and gap clamp

BASE_COLUMNS = ("can_id", "dlc", "data0", "data1", "data2", "data3",
                "data4", "data5", "data6", "data7")
TIME_COLUMNS = ("at_freq_sec", "hour")
ALL_COLUMNS = BASE_COLUMNS + TIME_COLUMNS
N_CLASSES = len(ClassLabel)


@dataclass
class CleanReport:
    removed: int = 0
    kept: int = 0
    reasons: dict[str, int] = field(default_factory=dict)


def clean(frames: list[CanFrame]) -> tuple[list[CanFrame], CleanReport]:
    """Drop frames with missing or out-of-range mandatory fields."""
    report = CleanReport()
    kept = []
    for frame in frames:
        problems = frame.problems()
        if problems:
            report.removed += 1
            key = problems[0]
            report.reasons[key] = report.reasons.get(key, 0) + 1
        else:
            kept.append(frame)
    report.kept = len(kept)
    if report.removed:
        log.warning("clean: removed %d of %d frames (%s)",
                    report.removed, len(frames), report.reasons)
    if not kept:
        log.warning("clean: no frames left after cleaning")
    return kept, report


@dataclass
class TimeColumns:
    """Calendar decomposition of frame timestamps at a fixed UTC offset."""

    hour: np.ndarray
    minute: np.ndarray
    second: np.ndarray
    millisecond: np.ndarray
    day: np.ndarray
    month: np.ndarray
    year: np.ndarray


def derive_time_columns(timestamps: np.ndarray, utc_offset_hours: float = 0.0) -> TimeColumns:
    ts = np.asarray(timestamps, dtype=np.float64) + utc_offset_hours * 3600.0
    whole = np.floor(ts).astype(np.int64)
    frac = ts - whole
    day_number = whole // 86400
    seconds_of_day = whole - day_number * 86400
    hour = seconds_of_day // 3600
    minute = (seconds_of_day % 3600) // 60
    second = seconds_of_day % 60
    millisecond = np.floor(frac * 1000.0).astype(np.int64)

    day = np.empty_like(day_number)
    month = np.empty_like(day_number)
    year = np.empty_like(day_number)
    epoch_ordinal = _dt.date(1970, 1, 1).toordinal()
    for dn in np.unique(day_number):
        date = _dt.date.fromordinal(epoch_ordinal + int(dn))
        mask = day_number == dn
        day[mask] = date.day
        month[mask] = date.month
        year[mask] = date.year
    return TimeColumns(hour, minute, second, millisecond, day, month, year)


def attack_frequency_seconds(
    timestamps: np.ndarray, can_ids: np.ndarray, sentinel: float = AT_FREQ_SENTINEL
) -> np.ndarray:
    """Per-frame same-id inter-arrival gap over a timestamp-sorted stream.

    First occurrence of an id yields the sentinel; gaps above the sentinel
    clamp to it.  Raises on unsorted input.
    """
    ts = np.asarray(timestamps, dtype=np.float64)
    ids = np.asarray(can_ids, dtype=np.int64)
    if ts.size == 0:
        return np.empty(0, dtype=np.float64)
    if np.any(np.diff(ts) < 0):
        raise ValueError("frames must be timestamp-sorted")
    # group frames per id while preserving stream order within each group
    order = np.lexsort((np.arange(ts.size), ids))
    sorted_ids = ids[order]
    sorted_ts = ts[order]
    gaps = np.full(ts.size, sentinel, dtype=np.float64)
    same_id = np.empty(ts.size, dtype=bool)
    same_id[0] = False
    same_id[1:] = sorted_ids[1:] == sorted_ids[:-1]
    raw = np.empty(ts.size, dtype=np.float64)
    raw[0] = sentinel
    raw[1:] = sorted_ts[1:] - sorted_ts[:-1]
    gaps[same_id] = np.minimum(raw[same_id], sentinel)
    out = np.empty(ts.size, dtype=np.float64)
    out[order] = gaps
    return out


@dataclass
class Dataset:
    """Feature table over a frame stream, stored column-major in X.

    X carries the full 12-column layout; matrix assembly selects the
    with/without-time view.  Rows keep the source stream's time order.
    """

    X: np.ndarray  # (n, 12) float64, ALL_COLUMNS order
    y: np.ndarray  # (n,) int64 label ordinals
    timestamps: np.ndarray  # (n,) float64, for windowing/consistency checks
    column_names: tuple[str, ...] = ALL_COLUMNS
    time_features_enabled: bool = True

    def __post_init__(self):
        if self.X.shape[0] != self.y.shape[0]:
            raise ValueError("X and y row counts differ")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def class_counts(self) -> dict[ClassLabel, int]:
        counts = np.bincount(self.y, minlength=N_CLASSES)
        return {label: int(counts[label]) for label in ClassLabel}

    def take(self, indices: np.ndarray) -> "Dataset":
        return Dataset(self.X[indices], self.y[indices], self.timestamps[indices],
                       self.column_names, self.time_features_enabled)


def dataset_from_frames(
    frames: list[CanFrame], utc_offset_hours: float = 0.0, sentinel: float = AT_FREQ_SENTINEL
) -> Dataset:
    """Build the 12-column feature table from a timestamp-sorted stream."""
    n = len(frames)
    ts = np.fromiter((f.timestamp for f in frames), dtype=np.float64, count=n)
    ids = np.fromiter((f.can_id for f in frames), dtype=np.int64, count=n)
    dlc = np.fromiter((f.dlc for f in frames), dtype=np.int64, count=n)
    y = np.fromiter((int(f.label) for f in frames), dtype=np.int64, count=n)
    data = np.zeros((n, 8), dtype=np.float64)  # dlc < 8 imputes 0
    for i, f in enumerate(frames):
        if f.dlc:
            data[i, : f.dlc] = f.data

    at_freq = attack_frequency_seconds(ts, ids, sentinel)
    hour = derive_time_columns(ts, utc_offset_hours).hour.astype(np.float64)

    X = np.column_stack([ids.astype(np.float64), dlc.astype(np.float64), data, at_freq, hour])
    return Dataset(X, y, ts)


def assemble_matrix(dataset: Dataset, time_features: bool) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """Select the feature view: 12 columns with time features, 10 without."""
    if time_features:
        return dataset.X, dataset.y, ALL_COLUMNS
    return dataset.X[:, : len(BASE_COLUMNS)], dataset.y, BASE_COLUMNS


@dataclass
class ScalerParams:
    """Per-column standardization parameters (population stddev convention),
    fitted on the training split only."""

    mean: np.ndarray
    stddev: np.ndarray
    columns: tuple[str, ...]

    @property
    def constant_columns(self) -> tuple[str, ...]:
        return tuple(c for c, s in zip(self.columns, self.stddev) if s == 0.0)

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "stddev": self.stddev.tolist(),
                "columns": list(self.columns)}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalerParams":
        return cls(np.asarray(d["mean"], dtype=np.float64),
                   np.asarray(d["stddev"], dtype=np.float64),
                   tuple(d["columns"]))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    @classmethod
    def load(cls, path: str) -> "ScalerParams":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def fit_scaler(X: np.ndarray, columns: tuple[str, ...]) -> ScalerParams:
    if X.shape[0] == 0:
        raise ValueError("cannot fit a scaler on an empty matrix")
    mean = X.mean(axis=0)
    stddev = X.std(axis=0)  # population (divide-by-n) convention
    return ScalerParams(mean, stddev, columns)


def apply_scaler(params: ScalerParams, X: np.ndarray) -> np.ndarray:
    if X.shape[1] != params.mean.shape[0]:
        raise ValueError("matrix arity does not match scaler params")
    safe = np.where(params.stddev == 0.0, 1.0, params.stddev)
    return (X - params.mean) / safe


@dataclass(frozen=True)
class EncoderSpec:
    """Label encoding: ordinal for the classical models, one-hot for the
    neural ones.  Class order is fixed to the ClassLabel ordinals."""

    mode: str = "ordinal"  # "ordinal" | "onehot"

    def __post_init__(self):
        if self.mode not in ("ordinal", "onehot"):
            raise ValueError(f"unknown encoder mode {self.mode!r}")


def encode_labels(y: np.ndarray, spec: EncoderSpec) -> np.ndarray:
    y = np.asarray(y, dtype=np.int64)
    if np.any((y < 0) | (y >= N_CLASSES)):
        raise ValueError("label ordinal outside 0..4")
    if spec.mode == "ordinal":
        return y.copy()
    return np.eye(N_CLASSES, dtype=np.float64)[y]


def decode_labels(encoded: np.ndarray, spec: EncoderSpec) -> np.ndarray:
    encoded = np.asarray(encoded)
    if spec.mode == "ordinal":
        return encoded.astype(np.int64)
    return np.argmax(encoded, axis=-1).astype(np.int64)


def onehot(y: np.ndarray) -> np.ndarray:
    return encode_labels(y, EncoderSpec("onehot"))


def split_train_test(
    dataset: Dataset, test_fraction: float = 0.2, seed: int = 0
) -> tuple[Dataset, Dataset]:
    """Stratified split; per-class test share within one row of the global
    fraction.

    Subsets come back in sampled (shuffled) row order, mirroring the usual
    shuffle-then-window protocol: window-based models consume rows in this
    order during training/evaluation, while the streaming detector windows
    over arrival order.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    test_idx = []
    train_idx = []
    for label in range(N_CLASSES):
        rows = np.nonzero(dataset.y == label)[0]
        if rows.size == 0:
            continue
        if rows.size < 2:
            raise ValueError(f"class ordinal {label} has fewer than 2 rows")
        n_test = int(round(test_fraction * rows.size))
        picked = rng.permutation(rows)
        test_idx.append(picked[:n_test])
        train_idx.append(picked[n_test:])
    train_rows = rng.permutation(np.concatenate(train_idx))
    test_rows = rng.permutation(np.concatenate(test_idx))
    return dataset.take(train_rows), dataset.take(test_rows)


def stratified_subsample(dataset: Dataset, max_rows: int, seed: int = 0) -> Dataset:
    """Class-proportional subsample used to bound training cost; keeps time
    order.  Returns the dataset unchanged when already small enough."""
    n = dataset.n_rows
    if n <= max_rows:
        return dataset
    rng = np.random.default_rng(seed)
    frac = max_rows / n
    keep = []
    for label in range(N_CLASSES):
        rows = np.nonzero(dataset.y == label)[0]
        n_keep = int(round(frac * rows.size))
        keep.append(rng.permutation(rows)[:n_keep])
    idx = np.sort(np.concatenate(keep))
    return dataset.take(idx)


def smote_oversample(
    dataset: Dataset, k: int = 5, target: int | None = None, seed: int = 0
) -> Dataset:
    """Raise minority-class counts to ``target`` by interpolating between
    same-class nearest neighbours (x_new = x + u * (x_nn - x), u ~ U(0,1)).

    Operates on the unscaled numeric feature space; classes at or above the
    target (by default the majority count) are untouched.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    counts = np.bincount(dataset.y, minlength=N_CLASSES)
    if target is None:
        target = int(counts.max())
    rng = np.random.default_rng(seed)

    new_X, new_y = [dataset.X], [dataset.y]
    new_ts = [dataset.timestamps]
    for label in range(N_CLASSES):
        n_c = int(counts[label])
        if n_c == 0 or n_c >= target:
            continue
        if n_c < 2:
            raise ValueError(f"class ordinal {label} has fewer than 2 samples; cannot interpolate")
        k_eff = min(k, n_c - 1)
        if k_eff < k:
            log.warning("smote: class %d has %d samples, clamping k to %d", label, n_c, k_eff)
        rows = np.nonzero(dataset.y == label)[0]
        Xc = dataset.X[rows]
        # brute-force neighbour search; desk-scale classes only
        d2 = ((Xc[:, None, :] - Xc[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        nn_idx = np.argsort(d2, axis=1)[:, :k_eff]

        n_new = target - n_c
        base = rng.integers(0, n_c, size=n_new)
        pick = rng.integers(0, k_eff, size=n_new)
        u = rng.random(n_new)
        x0 = Xc[base]
        x1 = Xc[nn_idx[base, pick]]
        synth = x0 + u[:, None] * (x1 - x0)
        new_X.append(synth)
        new_y.append(np.full(n_new, label, dtype=np.int64))
        new_ts.append(dataset.timestamps[rows][base])

    return Dataset(
        np.vstack(new_X), np.concatenate(new_y), np.concatenate(new_ts),
        dataset.column_names, dataset.time_features_enabled,
    )


def export_matrix_csv(path: str, X: np.ndarray, y: np.ndarray, columns: tuple[str, ...]) -> None:
    """Write a processed matrix as headered CSV (label ordinal last)."""
    header = ",".join(columns + ("label",))
    stacked = np.column_stack([X, y.astype(np.float64)])
    np.savetxt(path, stacked, delimiter=",", header=header, comments="", fmt="%.10g")
