"""Dataset windowing, SGD-with-momentum training, and checkpoint I/O.

Training is fully deterministic given (pairs, hyperparameters, seed):
the train/validation split, per-epoch shuffles, dropout masks and
parameter updates all derive from fixed seeded streams, and batches are
reduced in a fixed order.  Two runs with identical inputs produce
bit-identical checkpoints and training records.

The per-epoch ``train_rmse``/``val_rmse`` are measured with the
end-of-epoch parameters and dropout disabled, so the same numbers can be
recomputed later from the checkpoint (see the ``eval`` CLI command).
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import backends
from .errors import DataError, NumericalError
from .network import (
    TENSOR_FIELDS,
    Gradients,
    NetworkParams,
    backward_batch,
    batch_mse,
    forward_batch,
    init_params,
    predict_windows,
)
from .pose import NORMALIZED, sequence_detection_mask, sequence_to_array

CHECKPOINT_MAGIC = b"KPRN"
CHECKPOINT_VERSION = 1

# Seed-stream salts: one independent generator per random decision.
_SALT_INIT, _SALT_SPLIT, _SALT_SHUFFLE, _SALT_DROPOUT = 0, 1, 2, 3


@dataclass
class Hyperparameters:
    """Training configuration; defaults follow the reference setup."""

    lstm_layers: int = 2
    lstm_size: int = 64
    dense_hidden_layers: int = 1
    dense_hidden_size: int = 64
    dropout: float = 0.3
    lr_start: float = 3e-3
    lr_end: float = 1e-3
    momentum: float = 0.2
    max_epochs: int = 1200
    loss: str = "mse"
    window_length: int = 32
    batch_size: int = 32
    val_fraction: float = 0.1
    seed: int = 0
    mask_missing: bool = False
    early_stop_patience: Optional[int] = None

    def validate(self):
        if self.lstm_layers != 2:
            raise ValueError("this network is fixed at 2 LSTM layers")
        if self.dense_hidden_layers != 1:
            raise ValueError("this network is fixed at 1 dense hidden layer")
        if self.lstm_size < 1 or self.dense_hidden_size < 1:
            raise ValueError("layer sizes must be positive")
        if not (self.lr_start >= self.lr_end > 0):
            raise ValueError(
                f"need lr_start >= lr_end > 0, got {self.lr_start}, {self.lr_end}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must lie in [0, 1), got {self.dropout}")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.window_length < 1:
            raise ValueError("window_length must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError(f"val_fraction must lie in (0, 1), got {self.val_fraction}")
        if self.loss != "mse":
            raise ValueError(f"unsupported loss {self.loss!r}")
        if self.early_stop_patience is not None and self.early_stop_patience < 1:
            raise ValueError("early_stop_patience must be >= 1 when set")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Hyperparameters":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise DataError(f"unknown hyperparameter(s): {', '.join(sorted(unknown))}")
        hyper = cls(**d)
        hyper.validate()
        return hyper


@dataclass(frozen=True)
class TrainingRecord:
    epoch: int
    train_rmse: float
    val_rmse: float
    lr: float

    def __post_init__(self):
        for name in ("train_rmse", "val_rmse"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and non-negative, got {v}")


@dataclass(frozen=True)
class WindowPair:
    """One training example: a window of frames and the frame that follows."""

    window: np.ndarray        # (W, 50) view into the source sequence
    target: np.ndarray        # (50,)
    target_mask: np.ndarray   # (50,) 1.0 where the target joint was detected
    sequence_id: int


def make_windows(seqs, window_length: int) -> list:
    """Slide a window over each normalized sequence, pairing every
    contiguous ``window_length`` frames with the frame that follows.

    Windows never span sequence boundaries.  Sequences too short to give
    a pair contribute nothing; if none is long enough, raises DataError.
    """
    if window_length < 1:
        raise ValueError("window_length must be >= 1")
    pairs = []
    for sid, seq in enumerate(seqs):
        if seq.space != NORMALIZED:
            raise ValueError(f"sequence {sid} is not normalized")
        arr = sequence_to_array(seq)
        mask = sequence_detection_mask(seq)
        n = arr.shape[0] - window_length
        for i in range(n):
            pairs.append(WindowPair(
                window=arr[i:i + window_length],
                target=arr[i + window_length],
                target_mask=mask[i + window_length],
                sequence_id=sid,
            ))
    if not pairs:
        raise DataError(
            f"all sequences are too short for window length {window_length}"
        )
    return pairs


def split_pairs(pairs, hyper: Hyperparameters, seed: int):
    """Deterministic train/validation split by source sequence.

    With fewer than two source sequences no held-out split exists;
    validation then falls back to the training set.
    """
    ids = sorted({p.sequence_id for p in pairs})
    if len(ids) < 2:
        return list(pairs), []
    n_val = min(len(ids) - 1, max(1, round(hyper.val_fraction * len(ids))))
    rng = np.random.default_rng([seed, _SALT_SPLIT])
    perm = rng.permutation(np.array(ids))
    val_ids = set(int(i) for i in perm[:n_val])
    train = [p for p in pairs if p.sequence_id not in val_ids]
    val = [p for p in pairs if p.sequence_id in val_ids]
    return train, val


def learning_rate(hyper: Hyperparameters, epoch: int) -> float:
    """Linear decay from lr_start at epoch 0 to lr_end at max_epochs - 1."""
    if hyper.max_epochs <= 1:
        return hyper.lr_start
    frac = epoch / (hyper.max_epochs - 1)
    return hyper.lr_start + (hyper.lr_end - hyper.lr_start) * frac


def sgd_update(params: NetworkParams, velocity: dict, grads: Gradients,
               lr: float, momentum: float):
    """In-place momentum step: v <- momentum*v - lr*g; p <- p + v."""
    for name, p in params.tensors():
        v = velocity[name]
        v *= momentum
        v -= lr * getattr(grads, name)
        p += v


def evaluate_rmse(params: NetworkParams, windows, targets, masks=None,
                  batch_size: int = 256) -> float:
    """RMSE of the model over a window set, dropout disabled.

    Pools squared errors over every unmasked coordinate of every pair
    (the same convention as :func:`kprnn.metrics.rmse`).
    """
    preds = predict_windows(params, windows, batch_size)
    d = preds - np.asarray(targets, dtype=np.float64)
    if masks is None:
        return float(np.sqrt(np.mean(d * d)))
    masks = np.asarray(masks, dtype=np.float64)
    total = masks.sum()
    if total == 0:
        raise ValueError("mask excludes every element")
    return float(np.sqrt((d * d * masks).sum() / total))


def _stack(pairs, mask_missing: bool):
    windows = np.stack([p.window for p in pairs])
    targets = np.stack([p.target for p in pairs])
    masks = np.stack([p.target_mask for p in pairs]) if mask_missing else None
    return windows, targets, masks


def _epoch_per_sample(params, velocity, t_win, t_tgt, t_msk, order, hyper,
                      lr, rng_dropout, epoch):
    """One epoch of per-sample SGD (batch_size 1).

    Dropout masks for the whole epoch are drawn up front (layer-1, then
    layer-2, then dense hidden, sample-major).  Runs the fused numba step
    kernel when the numba backend is active; otherwise falls back to the
    generic forward/backward path fed the same masks.
    """
    n, w_len, _ = t_win.shape
    h = params.lstm_size
    d = params.dense_size
    dummy3 = np.empty((1, 1, 1))
    dummy2 = np.empty((1, 1))
    if hyper.dropout > 0.0:
        keep = 1.0 - hyper.dropout
        m1 = (rng_dropout.random((n, w_len, h)) >= hyper.dropout) / keep
        m2 = (rng_dropout.random((n, h)) >= hyper.dropout) / keep
        m3 = (rng_dropout.random((n, d)) >= hyper.dropout) / keep
    else:
        m1, m2, m3 = dummy3, dummy2, dummy2

    if backends.active_name() == "numba":
        from .backends import numba_backend

        v = velocity
        bad = numba_backend.sgd_epoch_b1(
            t_win, t_tgt, order,
            t_msk if t_msk is not None else dummy2, t_msk is not None,
            m1, m2, m3, hyper.dropout > 0.0,
            params.w_in1, params.w_rec1, params.b1,
            params.w_in2, params.w_rec2, params.b2,
            params.dense_w, params.dense_b, params.out_w, params.out_b,
            v["w_in1"], v["w_rec1"], v["b1"],
            v["w_in2"], v["w_rec2"], v["b2"],
            v["dense_w"], v["dense_b"], v["out_w"], v["out_b"],
            lr, hyper.momentum,
        )
        if bad >= 0:
            raise NumericalError(epoch, int(bad), lr)
        return

    for pos in range(n):
        s = int(order[pos])
        x = np.ascontiguousarray(t_win[s][:, None, :])
        masks = None
        if hyper.dropout > 0.0:
            masks = (m1[s][:, None, :], m2[s][None, :], m3[s][None, :])
        out, cache = forward_batch(x, params, hyper.dropout, masks=masks)
        sample_mask = t_msk[s:s + 1] if t_msk is not None else None
        loss = batch_mse(out, t_tgt[s:s + 1], sample_mask)
        if not math.isfinite(loss):
            raise NumericalError(epoch, pos, lr)
        grads = backward_batch(cache, t_tgt[s:s + 1], sample_mask)
        sgd_update(params, velocity, grads, lr, hyper.momentum)


def train(pairs, hyper: Hyperparameters, seed: Optional[int] = None,
          norm_size=None):
    """Train a network on (window, target) pairs.

    Returns (Checkpoint, list of per-epoch TrainingRecords).  ``seed``
    overrides ``hyper.seed``; ``norm_size`` is the (width, height) of the
    training footage, stored in the checkpoint for later denormalization
    (0, 0 when unknown).
    """
    hyper.validate()
    pairs = list(pairs)
    if not pairs:
        raise DataError("no training pairs")
    seed = hyper.seed if seed is None else int(seed)
    norm_w, norm_h = norm_size if norm_size is not None else (0, 0)

    w_len = pairs[0].window.shape[0]
    if w_len != hyper.window_length:
        raise ValueError(
            f"pairs carry windows of length {w_len} but hyperparameters say "
            f"{hyper.window_length}"
        )

    train_pairs, val_pairs = split_pairs(pairs, hyper, seed)
    t_win, t_tgt, t_msk = _stack(train_pairs, hyper.mask_missing)
    if val_pairs:
        v_win, v_tgt, v_msk = _stack(val_pairs, hyper.mask_missing)
    else:
        v_win, v_tgt, v_msk = t_win, t_tgt, t_msk

    params = init_params(
        [seed, _SALT_INIT],
        input_size=t_win.shape[2],
        lstm_size=hyper.lstm_size,
        dense_size=hyper.dense_hidden_size,
        output_size=t_tgt.shape[1],
    )
    velocity = {name: np.zeros_like(arr) for name, arr in params.tensors()}
    rng_shuffle = np.random.default_rng([seed, _SALT_SHUFFLE])
    rng_dropout = np.random.default_rng([seed, _SALT_DROPOUT])

    n_train = t_win.shape[0]
    records = []
    best_val = math.inf
    stall = 0
    for epoch in range(hyper.max_epochs):
        lr = learning_rate(hyper, epoch)
        order = rng_shuffle.permutation(n_train)
        if hyper.batch_size == 1:
            _epoch_per_sample(params, velocity, t_win, t_tgt, t_msk, order,
                              hyper, lr, rng_dropout, epoch)
        else:
            for bi, start in enumerate(range(0, n_train, hyper.batch_size)):
                idx = order[start:start + hyper.batch_size]
                x = np.ascontiguousarray(t_win[idx].transpose(1, 0, 2))
                out, cache = forward_batch(x, params, hyper.dropout, rng_dropout)
                batch_masks = t_msk[idx] if t_msk is not None else None
                loss = batch_mse(out, t_tgt[idx], batch_masks)
                if not math.isfinite(loss):
                    raise NumericalError(epoch, bi, lr)
                grads = backward_batch(cache, t_tgt[idx], batch_masks)
                sgd_update(params, velocity, grads, lr, hyper.momentum)

        train_rmse = evaluate_rmse(params, t_win, t_tgt, t_msk)
        val_rmse = evaluate_rmse(params, v_win, v_tgt, v_msk)
        records.append(TrainingRecord(epoch, train_rmse, val_rmse, lr))

        if hyper.early_stop_patience is not None:
            if val_rmse < best_val:
                best_val = val_rmse
                stall = 0
            else:
                stall += 1
                if stall >= hyper.early_stop_patience:
                    break

    ckpt = Checkpoint(
        params=params, hyper=hyper, epoch=records[-1].epoch, seed=seed,
        norm_width=norm_w, norm_height=norm_h,
    )
    return ckpt, records


@dataclass
class Checkpoint:
    params: NetworkParams
    hyper: Hyperparameters
    epoch: int
    seed: int
    norm_width: float = 0
    norm_height: float = 0
    format_version: int = CHECKPOINT_VERSION


def save_checkpoint(ckpt: Checkpoint, path) -> None:
    """Write the self-describing binary checkpoint.

    Layout: magic "KPRN", u32 format version, u32 header length, header
    JSON (dims, hyperparameters, epoch, seed, normalization metadata,
    gate/tensor order), then every tensor as little-endian float64 in
    row-major order, then a CRC-32 of all preceding bytes.
    """
    ckpt.params.validate()
    header = {
        "dims": {
            "input_size": ckpt.params.input_size,
            "lstm_size": ckpt.params.lstm_size,
            "dense_size": ckpt.params.dense_size,
            "output_size": ckpt.params.output_size,
        },
        "hyperparameters": ckpt.hyper.to_dict(),
        "epoch": ckpt.epoch,
        "seed": ckpt.seed,
        "norm_width": ckpt.norm_width,
        "norm_height": ckpt.norm_height,
        "gate_order": "ifgo",
        "tensor_order": list(TENSOR_FIELDS),
    }
    blob = json.dumps(header, separators=(",", ":")).encode("utf-8")
    buf = bytearray()
    buf += CHECKPOINT_MAGIC
    buf += struct.pack("<I", ckpt.format_version)
    buf += struct.pack("<I", len(blob))
    buf += blob
    for _, arr in ckpt.params.tensors():
        buf += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    buf += struct.pack("<I", zlib.crc32(bytes(buf)))
    with open(path, "wb") as fh:
        fh.write(bytes(buf))


def _expected_shapes(dims: dict) -> dict:
    h4 = 4 * dims["lstm_size"]
    h = dims["lstm_size"]
    return {
        "w_in1": (h4, dims["input_size"]), "w_rec1": (h4, h), "b1": (h4,),
        "w_in2": (h4, h), "w_rec2": (h4, h), "b2": (h4,),
        "dense_w": (dims["dense_size"], h), "dense_b": (dims["dense_size"],),
        "out_w": (dims["output_size"], dims["dense_size"]),
        "out_b": (dims["output_size"],),
    }


def load_checkpoint(path) -> Checkpoint:
    """Read a checkpoint, verifying magic, version, CRC and dimensions."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 16:
        raise DataError(f"{path}: truncated checkpoint")
    if data[:4] != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not a checkpoint file (bad magic)")
    version = struct.unpack_from("<I", data, 4)[0]
    if version != CHECKPOINT_VERSION:
        raise DataError(
            f"{path}: unsupported checkpoint version {version} "
            f"(expected {CHECKPOINT_VERSION})"
        )
    hlen = struct.unpack_from("<I", data, 8)[0]
    body_start = 12 + hlen
    if body_start + 4 > len(data):
        raise DataError(f"{path}: truncated checkpoint")
    stored_crc = struct.unpack_from("<I", data, len(data) - 4)[0]
    if zlib.crc32(data[:-4]) != stored_crc:
        raise DataError(f"{path}: corrupt checkpoint (checksum mismatch)")
    try:
        header = json.loads(data[12:body_start].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: corrupt checkpoint header ({exc})") from exc

    for key in ("dims", "hyperparameters", "epoch", "seed",
                "norm_width", "norm_height"):
        if key not in header:
            raise DataError(f"{path}: checkpoint header missing {key!r}")
    shapes = _expected_shapes(header["dims"])
    total = sum(int(np.prod(s)) for s in shapes.values())
    if len(data) - body_start - 4 != 8 * total:
        raise DataError(f"{path}: checkpoint tensor payload has the wrong size")

    arrays = {}
    offset = body_start
    for name in TENSOR_FIELDS:
        shape = shapes[name]
        count = int(np.prod(shape))
        arrays[name] = (
            np.frombuffer(data, dtype="<f8", count=count, offset=offset)
            .reshape(shape)
            .astype(np.float64)
        )
        offset += 8 * count
    params = NetworkParams(**arrays)
    try:
        params.validate()
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc

    hyper = Hyperparameters.from_dict(header["hyperparameters"])
    if hyper.lstm_size != header["dims"]["lstm_size"] or \
            hyper.dense_hidden_size != header["dims"]["dense_size"]:
        raise DataError(f"{path}: header dims disagree with hyperparameters")
    return Checkpoint(
        params=params, hyper=hyper, epoch=header["epoch"], seed=header["seed"],
        norm_width=header["norm_width"], norm_height=header["norm_height"],
        format_version=version,
    )
