"""Pure-numpy LSTM layer kernels (reference path).

Array conventions shared by both backends:

* ``x_seq``   - (T, B, IN) float64, C-contiguous
* ``w_in_t``  - (IN, 4H) transposed input-to-gates weights
* ``w_rec_t`` - (H, 4H) transposed recurrent weights
* ``bias``    - (4H,)
* gate order inside the 4H axis is i, f, g, o
* state starts at zero; returned per-step tensors feed the backward pass

``lstm_backward`` takes the untransposed (4H, IN) / (4H, H) weights and the
gradient of the loss w.r.t. every exported hidden vector, and returns the
gradient w.r.t. the inputs plus all three parameter gradients, summed over
time and batch.
"""

from __future__ import annotations

import numpy as np

NAME = "numpy"


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_forward(x_seq, w_in_t, w_rec_t, bias):
    T, B, _ = x_seq.shape
    H4 = w_in_t.shape[1]
    H = H4 // 4

    proj = (x_seq.reshape(T * B, -1) @ w_in_t).reshape(T, B, H4)
    gates = np.empty((T, B, H4))
    c_seq = np.empty((T, B, H))
    tanh_c = np.empty((T, B, H))
    h_seq = np.empty((T, B, H))

    h_prev = np.zeros((B, H))
    c_prev = np.zeros((B, H))
    for t in range(T):
        pre = proj[t] + h_prev @ w_rec_t + bias
        i = _sigmoid(pre[:, :H])
        f = _sigmoid(pre[:, H:2 * H])
        g = np.tanh(pre[:, 2 * H:3 * H])
        o = _sigmoid(pre[:, 3 * H:])
        c = f * c_prev + i * g
        tc = np.tanh(c)
        gates[t, :, :H] = i
        gates[t, :, H:2 * H] = f
        gates[t, :, 2 * H:3 * H] = g
        gates[t, :, 3 * H:] = o
        c_seq[t] = c
        tanh_c[t] = tc
        h_seq[t] = o * tc
        h_prev = h_seq[t]
        c_prev = c
    return gates, c_seq, tanh_c, h_seq


def lstm_backward(dh_out, x_seq, gates, c_seq, tanh_c, h_seq, w_in, w_rec,
                  need_dx=True):
    T, B, H = dh_out.shape
    H4 = 4 * H

    dgates = np.empty((T, B, H4))
    dh_rec = np.zeros((B, H))
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        i = gates[t, :, :H]
        f = gates[t, :, H:2 * H]
        g = gates[t, :, 2 * H:3 * H]
        o = gates[t, :, 3 * H:]
        tc = tanh_c[t]
        c_prev = c_seq[t - 1] if t > 0 else 0.0

        dh = dh_out[t] + dh_rec
        do = dh * tc
        dcv = dc + dh * o * (1.0 - tc * tc)
        dgates[t, :, :H] = (dcv * g) * i * (1.0 - i)
        dgates[t, :, H:2 * H] = (dcv * c_prev) * f * (1.0 - f)
        dgates[t, :, 2 * H:3 * H] = (dcv * i) * (1.0 - g * g)
        dgates[t, :, 3 * H:] = do * o * (1.0 - o)
        dh_rec = dgates[t] @ w_rec
        dc = dcv * f

    dg_flat = dgates.reshape(T * B, H4)
    dw_in = dg_flat.T @ x_seq.reshape(T * B, -1)
    dbias = dg_flat.sum(axis=0)
    if T > 1:
        dw_rec = (
            dgates[1:].reshape((T - 1) * B, H4).T
            @ h_seq[:T - 1].reshape((T - 1) * B, H)
        )
    else:
        dw_rec = np.zeros((H4, H))
    dx_seq = (dg_flat @ w_in).reshape(x_seq.shape) if need_dx \
        else np.empty((0, 0, 0))
    return dx_seq, dw_in, dw_rec, dbias
