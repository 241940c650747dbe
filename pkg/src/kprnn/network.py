"""The next-frame pose predictor: two stacked LSTM layers feeding a
sigmoid dense hidden layer and a sigmoid output layer.

Parameters, the deterministic forward pass, and analytic gradients via
backpropagation through the full input window live here.  The time-loop
kernels are delegated to :mod:`kprnn.backends`; everything at this level
is plain float64 numpy.

Weight layout: per LSTM layer, input-to-gates W (4H x IN), recurrent
U (4H x H) and bias (4H,), with gate order i, f, g, o along the 4H axis;
then dense hidden (D x H) + bias and output (OUT x D) + bias.  The same
order is used for checkpoint serialization.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from . import backends
from .pose import PoseVector

GATE_ORDER = "ifgo"

TENSOR_FIELDS = (
    "w_in1", "w_rec1", "b1",
    "w_in2", "w_rec2", "b2",
    "dense_w", "dense_b",
    "out_w", "out_b",
)


class LstmState(NamedTuple):
    """Hidden and cell vectors for one layer; zeros at sequence start."""

    h: np.ndarray
    c: np.ndarray


def zero_state(lstm_size: int) -> LstmState:
    return LstmState(np.zeros(lstm_size), np.zeros(lstm_size))


@dataclass
class NetworkParams:
    w_in1: np.ndarray
    w_rec1: np.ndarray
    b1: np.ndarray
    w_in2: np.ndarray
    w_rec2: np.ndarray
    b2: np.ndarray
    dense_w: np.ndarray
    dense_b: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray

    @property
    def input_size(self) -> int:
        return self.w_in1.shape[1]

    @property
    def lstm_size(self) -> int:
        return self.w_rec1.shape[1]

    @property
    def dense_size(self) -> int:
        return self.dense_w.shape[0]

    @property
    def output_size(self) -> int:
        return self.out_w.shape[0]

    def tensors(self):
        """(name, array) pairs in the canonical serialization order."""
        return [(name, getattr(self, name)) for name in TENSOR_FIELDS]

    def copy(self) -> "NetworkParams":
        return NetworkParams(**{n: a.copy() for n, a in self.tensors()})

    def validate(self):
        h4, inp = self.w_in1.shape
        h = self.w_rec1.shape[1]
        d = self.dense_w.shape[0]
        out = self.out_w.shape[0]
        expected = {
            "w_in1": (h4, inp), "w_rec1": (h4, h), "b1": (h4,),
            "w_in2": (h4, h), "w_rec2": (h4, h), "b2": (h4,),
            "dense_w": (d, h), "dense_b": (d,),
            "out_w": (out, d), "out_b": (out,),
        }
        if h4 != 4 * h:
            raise ValueError(f"gate dimension {h4} is not 4x the LSTM size {h}")
        for name, arr in self.tensors():
            if arr.shape != expected[name]:
                raise ValueError(
                    f"{name} has shape {arr.shape}, expected {expected[name]}"
                )
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite values")


@dataclass
class Gradients:
    """Loss gradients, shape-identical to NetworkParams."""

    w_in1: np.ndarray
    w_rec1: np.ndarray
    b1: np.ndarray
    w_in2: np.ndarray
    w_rec2: np.ndarray
    b2: np.ndarray
    dense_w: np.ndarray
    dense_b: np.ndarray
    out_w: np.ndarray
    out_b: np.ndarray

    def tensors(self):
        return [(name, getattr(self, name)) for name in TENSOR_FIELDS]


def init_params(seed, input_size: int = 50, lstm_size: int = 64,
                dense_size: int = 64, output_size: int = 50,
                forget_bias: float = 1.0) -> NetworkParams:
    """Deterministic Glorot-uniform initialization.

    Each weight matrix is drawn from U(-a, a) with a = sqrt(6/(fan_in +
    fan_out)); biases start at zero except the LSTM forget-gate slices,
    which default to 1 for early training stability (configurable).
    """
    rng = np.random.default_rng(seed)
    h4 = 4 * lstm_size

    def glorot(rows, cols):
        limit = np.sqrt(6.0 / (rows + cols))
        return rng.uniform(-limit, limit, size=(rows, cols))

    b1 = np.zeros(h4)
    b2 = np.zeros(h4)
    b1[lstm_size:2 * lstm_size] = forget_bias
    b2[lstm_size:2 * lstm_size] = forget_bias
    params = NetworkParams(
        w_in1=glorot(h4, input_size),
        w_rec1=glorot(h4, lstm_size),
        b1=b1,
        w_in2=glorot(h4, lstm_size),
        w_rec2=glorot(h4, lstm_size),
        b2=b2,
        dense_w=glorot(dense_size, lstm_size),
        dense_b=np.zeros(dense_size),
        out_w=glorot(output_size, dense_size),
        out_b=np.zeros(output_size),
    )
    params.validate()
    return params


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_cell(x, state, w_in, w_rec, bias):
    """One LSTM step for a single sample; returns the new (h, c).

    Gates i, f, o use the logistic sigmoid, candidate g uses tanh, each
    taken from the matching quarter of w_in @ x + w_rec @ h_prev + bias;
    then c = f*c_prev + i*g and h = o*tanh(c).
    """
    x = np.asarray(x, dtype=np.float64)
    h_prev, c_prev = state
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    h4 = bias.shape[0]
    hsz = h4 // 4
    if w_in.shape != (h4, x.shape[0]) or w_rec.shape != (h4, hsz):
        raise ValueError(
            f"dimension mismatch: x {x.shape}, w_in {w_in.shape}, w_rec {w_rec.shape}"
        )
    if h_prev.shape != (hsz,) or c_prev.shape != (hsz,):
        raise ValueError(f"state must be two ({hsz},) vectors")
    pre = w_in @ x + w_rec @ h_prev + bias
    i = _sigmoid(pre[:hsz])
    f = _sigmoid(pre[hsz:2 * hsz])
    g = np.tanh(pre[2 * hsz:3 * hsz])
    o = _sigmoid(pre[3 * hsz:])
    c = f * c_prev + i * g
    h = o * np.tanh(c)
    return LstmState(h, c)


def as_window(window, input_size: Optional[int] = None) -> np.ndarray:
    """Coerce a window (ndarray or sequence of vectors/PoseVectors) to
    a C-contiguous (T, IN) float64 array."""
    if isinstance(window, np.ndarray):
        arr = window
    else:
        rows = [v.to_array() if isinstance(v, PoseVector) else np.asarray(v)
                for v in window]
        arr = np.array(rows)
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError(f"window must be a non-empty (T, IN) array, got {arr.shape}")
    if input_size is not None and arr.shape[1] != input_size:
        raise ValueError(
            f"window feature size {arr.shape[1]} does not match network input "
            f"size {input_size}"
        )
    return arr


@dataclass
class ForwardCache:
    """Everything backward() needs from one forward pass."""

    params: NetworkParams
    x_seq: np.ndarray
    gates1: np.ndarray
    c1: np.ndarray
    tanh_c1: np.ndarray
    h1: np.ndarray
    x2_seq: np.ndarray
    gates2: np.ndarray
    c2: np.ndarray
    tanh_c2: np.ndarray
    h2: np.ndarray
    top: np.ndarray
    hidden: np.ndarray
    hidden_dropped: np.ndarray
    out: np.ndarray
    # Inverted-dropout keep masks, pre-scaled by 1/(1-rate); None when off.
    mask1: Optional[np.ndarray]
    mask2: Optional[np.ndarray]
    mask3: Optional[np.ndarray]


def _parse_dropout(dropout):
    if dropout is None:
        return 0.0, None
    rate, rng = dropout
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must lie in [0, 1), got {rate}")
    return float(rate), rng


def forward_batch(x_seq: np.ndarray, params: NetworkParams,
                  dropout_rate: float = 0.0, rng=None, masks=None):
    """Run the network over a (T, B, IN) batch of windows.

    Returns (predictions (B, OUT), ForwardCache).  With dropout enabled,
    inverted-dropout masks are applied to each LSTM layer's exported
    outputs and to the dense hidden activation; masks for layer-2 steps
    before the last are never consumed downstream, so only the final
    step's mask is drawn.  Draw order: layer-1 (T, B, H), layer-2 (B, H),
    dense hidden (B, D).  ``masks`` supplies pre-drawn, pre-scaled keep
    masks of those shapes instead of drawing from ``rng``.
    """
    if x_seq.ndim != 3:
        raise ValueError(f"x_seq must be (T, B, IN), got {x_seq.shape}")
    if x_seq.shape[2] != params.input_size:
        raise ValueError(
            f"input size {x_seq.shape[2]} does not match network input "
            f"size {params.input_size}"
        )
    if dropout_rate and rng is None and masks is None:
        raise ValueError("dropout requires an rng or explicit masks")
    x_seq = np.ascontiguousarray(x_seq, dtype=np.float64)
    T, B, _ = x_seq.shape
    H = params.lstm_size
    keep = 1.0 - dropout_rate
    impl = backends.get_backend()

    gates1, c1, tanh_c1, h1 = impl.lstm_forward(
        x_seq,
        np.ascontiguousarray(params.w_in1.T),
        np.ascontiguousarray(params.w_rec1.T),
        params.b1,
    )

    mask1 = mask2 = mask3 = None
    if masks is not None:
        mask1, mask2, mask3 = masks
    elif dropout_rate > 0.0:
        mask1 = (rng.random((T, B, H)) >= dropout_rate) / keep
        mask2 = (rng.random((B, H)) >= dropout_rate) / keep
        mask3 = (rng.random((B, params.dense_size)) >= dropout_rate) / keep

    x2_seq = np.ascontiguousarray(h1 * mask1) if mask1 is not None else h1
    gates2, c2, tanh_c2, h2 = impl.lstm_forward(
        x2_seq,
        np.ascontiguousarray(params.w_in2.T),
        np.ascontiguousarray(params.w_rec2.T),
        params.b2,
    )

    top = h2[-1] * mask2 if mask2 is not None else h2[-1]
    hidden = np.tanh(top @ params.dense_w.T + params.dense_b)
    hidden_dropped = hidden * mask3 if mask3 is not None else hidden
    out = _sigmoid(hidden_dropped @ params.out_w.T + params.out_b)

    cache = ForwardCache(
        params=params, x_seq=x_seq,
        gates1=gates1, c1=c1, tanh_c1=tanh_c1, h1=h1,
        x2_seq=x2_seq, gates2=gates2, c2=c2, tanh_c2=tanh_c2, h2=h2,
        top=top, hidden=hidden, hidden_dropped=hidden_dropped, out=out,
        mask1=mask1, mask2=mask2, mask3=mask3,
    )
    return out, cache


def forward(window, params: NetworkParams, dropout=None):
    """Single-window forward pass; returns (prediction (OUT,), cache)."""
    rate, rng = _parse_dropout(dropout)
    x = as_window(window, params.input_size)
    out, cache = forward_batch(
        np.ascontiguousarray(x[:, None, :]), params, rate, rng
    )
    return out[0], cache


def mse_loss(pred, target, mask=None) -> float:
    """Mean squared error over unmasked elements of one prediction."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {target.shape}")
    d = pred - target
    if mask is None:
        return float(np.mean(d * d))
    mask = np.asarray(mask, dtype=np.float64)
    count = mask.sum()
    if count == 0:
        raise ValueError("mask excludes every element")
    return float((d * d * mask).sum() / count)


def batch_mse(preds, targets, masks=None) -> float:
    """Mean over the batch of each sample's (masked) mean squared error."""
    d = preds - targets
    if masks is None:
        return float(np.mean(d * d))
    counts = masks.sum(axis=1)
    if (counts == 0).any():
        raise ValueError("mask excludes every element of some sample")
    return float(np.mean((d * d * masks).sum(axis=1) / counts))


def backward_batch(cache: ForwardCache, targets, masks=None) -> Gradients:
    """Gradients of batch_mse w.r.t. every parameter, averaged over the batch."""
    params = cache.params
    out = cache.out
    targets = np.asarray(targets, dtype=np.float64)
    if targets.shape != out.shape:
        raise ValueError(f"targets shape {targets.shape} does not match {out.shape}")
    B, OUT = out.shape

    diff = out - targets
    if masks is None:
        dout = (2.0 / (OUT * B)) * diff
    else:
        masks = np.asarray(masks, dtype=np.float64)
        counts = masks.sum(axis=1, keepdims=True)
        if (counts == 0).any():
            raise ValueError("mask excludes every element of some sample")
        dout = 2.0 * diff * masks / (counts * B)

    # Output layer.
    dz_out = dout * out * (1.0 - out)
    d_out_w = dz_out.T @ cache.hidden_dropped
    d_out_b = dz_out.sum(axis=0)
    dhid = dz_out @ params.out_w
    if cache.mask3 is not None:
        dhid = dhid * cache.mask3

    # Dense hidden layer.
    dz_hid = dhid * (1.0 - cache.hidden * cache.hidden)
    d_dense_w = dz_hid.T @ cache.top
    d_dense_b = dz_hid.sum(axis=0)
    dtop = dz_hid @ params.dense_w
    if cache.mask2 is not None:
        dtop = dtop * cache.mask2

    impl = backends.get_backend()
    T = cache.x_seq.shape[0]
    dh2 = np.zeros_like(cache.h2)
    dh2[-1] = dtop
    dx2, dw_in2, dw_rec2, db2 = impl.lstm_backward(
        dh2, cache.x2_seq, cache.gates2, cache.c2, cache.tanh_c2, cache.h2,
        params.w_in2, params.w_rec2,
    )

    dh1 = dx2 * cache.mask1 if cache.mask1 is not None else dx2
    dh1 = np.ascontiguousarray(dh1)
    _, dw_in1, dw_rec1, db1 = impl.lstm_backward(
        dh1, cache.x_seq, cache.gates1, cache.c1, cache.tanh_c1, cache.h1,
        params.w_in1, params.w_rec1, False,
    )

    return Gradients(
        w_in1=dw_in1, w_rec1=dw_rec1, b1=db1,
        w_in2=dw_in2, w_rec2=dw_rec2, b2=db2,
        dense_w=d_dense_w, dense_b=d_dense_b,
        out_w=d_out_w, out_b=d_out_b,
    )


def backward(cache: ForwardCache, target, mask=None) -> Gradients:
    """Gradients of mse_loss for a single-window forward cache."""
    target = np.asarray(target, dtype=np.float64)
    masks = None if mask is None else np.asarray(mask, dtype=np.float64)[None, :]
    return backward_batch(cache, target[None, :], masks)


def predict_next(window, params: NetworkParams) -> np.ndarray:
    """Next-frame prediction for one window, dropout disabled."""
    out, _ = forward(window, params)
    return out


def predict_windows(params: NetworkParams, windows: np.ndarray,
                    batch_size: int = 256) -> np.ndarray:
    """Next-frame predictions for an (N, T, IN) stack of windows."""
    windows = np.asarray(windows, dtype=np.float64)
    if windows.ndim != 3:
        raise ValueError(f"windows must be (N, T, IN), got {windows.shape}")
    n = windows.shape[0]
    preds = np.empty((n, params.output_size))
    for start in range(0, n, batch_size):
        chunk = windows[start:start + batch_size]
        x = np.ascontiguousarray(chunk.transpose(1, 0, 2))
        out, _ = forward_batch(x, params)
        preds[start:start + chunk.shape[0]] = out
    return preds


def generate(seed_window, horizon: int, params: NetworkParams) -> np.ndarray:
    """Autoregressive rollout: slide the window, feed each prediction back.

    Returns an (horizon, OUT) array of successive next-frame predictions.
    """
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if params.input_size != params.output_size:
        raise ValueError("autoregressive generation needs input size == output size")
    window = as_window(seed_window, params.input_size).copy()
    out = np.empty((horizon, params.output_size))
    for k in range(horizon):
        pred = predict_next(window, params)
        out[k] = pred
        window = np.roll(window, -1, axis=0)
        window[-1] = pred
    return out
