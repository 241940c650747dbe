"""Prediction error metrics and the training-curve CSV format.

RMSE here is the root of the MEAN squared error pooled over every
unmasked coordinate element of every (prediction, target) pair.  Units
follow the coordinate space of the inputs; the pipeline computes it in
normalized (unit-square) coordinates.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DataError
from .pose import NORMALIZED, PoseSequence, PoseVector, sequence_to_array
from .training import TrainingRecord

CURVE_HEADER = "epoch,train_rmse,val_rmse,lr"


def _as_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, np.ndarray):
        arr = np.asarray(vectors, dtype=np.float64)
    else:
        rows = [v.to_array() if isinstance(v, PoseVector) else np.asarray(v, dtype=np.float64)
                for v in vectors]
        arr = np.array(rows) if rows else np.empty((0, 0))
    if arr.ndim == 1:
        arr = arr[None, :]
    return arr


def rmse(preds, targets, mask=None) -> float:
    """Root mean squared error between two equally long vector sets."""
    p = _as_matrix(preds)
    t = _as_matrix(targets)
    if p.shape[0] != t.shape[0]:
        raise ValueError(f"length mismatch: {p.shape[0]} predictions vs "
                         f"{t.shape[0]} targets")
    if p.shape[0] == 0:
        raise ValueError("rmse of an empty set is undefined")
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    d = p - t
    if mask is None:
        return float(np.sqrt(np.mean(d * d)))
    m = np.asarray(mask, dtype=np.float64)
    if m.ndim == 1:
        m = np.broadcast_to(m, p.shape)
    if m.shape != p.shape:
        raise ValueError(f"mask shape {m.shape} does not match {p.shape}")
    total = m.sum()
    if total == 0:
        raise ValueError("mask excludes every element")
    return float(np.sqrt((d * d * m).sum() / total))


def per_keypoint_rmse(preds, targets) -> np.ndarray:
    """RMSE restricted to each joint's (x, y) pair; returns one value per joint."""
    p = _as_matrix(preds)
    t = _as_matrix(targets)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {t.shape}")
    if p.shape[0] == 0:
        raise ValueError("rmse of an empty set is undefined")
    if p.shape[1] % 2 != 0:
        raise ValueError("vectors must interleave x,y pairs (even length)")
    n_joints = p.shape[1] // 2
    d = (p - t).reshape(p.shape[0], n_joints, 2)
    return np.sqrt((d * d).mean(axis=(0, 2)))


def persistence_pairs(seq: PoseSequence, window_length: int):
    """(predictions, targets) for the model-free "next = current" predictor,
    restricted to the frames eligible as training targets."""
    if seq.space != NORMALIZED:
        raise ValueError("persistence baseline expects a normalized sequence")
    arr = sequence_to_array(seq)
    n = arr.shape[0]
    if n <= window_length + 1:
        raise ValueError(
            f"sequence of length {n} is too short for window length {window_length}"
        )
    return arr[window_length - 1:n - 1], arr[window_length:n]


def persistence_baseline(seq: PoseSequence, window_length: int) -> float:
    """RMSE of predicting each eligible frame as a copy of the one before it."""
    preds, targets = persistence_pairs(seq, window_length)
    return rmse(preds, targets)


def export_curve(records, path) -> None:
    """Write per-epoch training records as CSV.

    Floats are written with their shortest exact decimal representation,
    so a read-back reproduces the records exactly.
    """
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CURVE_HEADER + "\n")
        for r in records:
            fh.write(f"{r.epoch},{r.train_rmse!r},{r.val_rmse!r},{r.lr!r}\n")


def read_curve(path) -> list:
    """Parse a training-curve CSV back into TrainingRecords."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh]
    if not lines or lines[0] != CURVE_HEADER:
        raise DataError(f"{path}: missing curve header {CURVE_HEADER!r}")
    records = []
    for ln_no, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise DataError(f"{path}:{ln_no}: expected 4 fields, got {len(parts)}")
        try:
            records.append(TrainingRecord(
                epoch=int(parts[0]),
                train_rmse=float(parts[1]),
                val_rmse=float(parts[2]),
                lr=float(parts[3]),
            ))
        except ValueError as exc:
            raise DataError(f"{path}:{ln_no}: {exc}") from exc
    return records
