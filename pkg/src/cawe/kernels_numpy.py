"""Pure-numpy reference implementations of the hot sequence kernels.

These are the fallback path. `kernels_numba` provides jitted twins with the
same signatures and (up to float round-off) the same results; `backend`
picks one at import time.

Gate layout for all LSTM kernels: [input, forget, candidate, output],
each a block of H, in that order along the 4H axis.
"""

import numpy as np


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def lstm_forward(x, wx, wh, b, reverse=False):
    """Run a unidirectional LSTM over a sequence.

    x: (T, D) inputs, wx: (4H, D), wh: (4H, H), b: (4H,).
    Initial hidden and cell states are zero. With reverse=True the
    sequence is processed back to front but outputs stay at their
    original positions.

    Returns (h, c, gates): (T, H) hidden states, (T, H) cell states and
    (T, 4H) post-activation gate values, all aligned to input positions.
    """
    T = x.shape[0]
    H = wh.shape[1]
    xg = x @ wx.T + b
    h_seq = np.zeros((T, H))
    c_seq = np.zeros((T, H))
    gates = np.zeros((T, 4 * H))
    h_prev = np.zeros(H)
    c_prev = np.zeros(H)
    order = range(T - 1, -1, -1) if reverse else range(T)
    for t in order:
        pre = xg[t] + wh @ h_prev
        i = _sigmoid(pre[:H])
        f = _sigmoid(pre[H:2 * H])
        g = np.tanh(pre[2 * H:3 * H])
        o = _sigmoid(pre[3 * H:])
        c = f * c_prev + i * g
        h = o * np.tanh(c)
        gates[t, :H] = i
        gates[t, H:2 * H] = f
        gates[t, 2 * H:3 * H] = g
        gates[t, 3 * H:] = o
        h_seq[t] = h
        c_seq[t] = c
        h_prev = h
        c_prev = c
    return h_seq, c_seq, gates


def lstm_backward(dh_out, x, h_seq, c_seq, gates, wx, wh, reverse=False):
    """Backprop through lstm_forward.

    dh_out: (T, H) gradient w.r.t. the returned hidden states.
    Returns (dx, dwx, dwh, db).
    """
    T = x.shape[0]
    H = wh.shape[1]
    whT = np.ascontiguousarray(wh.T)
    dG = np.zeros((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    # walk the processing order backwards
    order = range(T) if reverse else range(T - 1, -1, -1)
    for t in order:
        if reverse:
            c_prev = c_seq[t + 1] if t + 1 < T else np.zeros(H)
        else:
            c_prev = c_seq[t - 1] if t > 0 else np.zeros(H)
        i = gates[t, :H]
        f = gates[t, H:2 * H]
        g = gates[t, 2 * H:3 * H]
        o = gates[t, 3 * H:]
        tc = np.tanh(c_seq[t])
        dh = dh_out[t] + dh_next
        do = dh * tc
        dc = dc_next + dh * o * (1.0 - tc * tc)
        di = dc * g
        df = dc * c_prev
        dg = dc * i
        dc_next = dc * f
        dG[t, :H] = di * i * (1.0 - i)
        dG[t, H:2 * H] = df * f * (1.0 - f)
        dG[t, 2 * H:3 * H] = dg * (1.0 - g * g)
        dG[t, 3 * H:] = do * o * (1.0 - o)
        dh_next = whT @ dG[t]
    h_prev_seq = np.zeros((T, H))
    if reverse:
        h_prev_seq[:T - 1] = h_seq[1:]
    else:
        h_prev_seq[1:] = h_seq[:T - 1]
    dx = dG @ wx
    dwx = dG.T @ x
    dwh = dG.T @ h_prev_seq
    db = dG.sum(axis=0)
    return dx, dwx, dwh, db


def conv1d_same(signal, kernel):
    """Same-length 1-D correlation with zero padding.

    out[t] = sum_j kernel[j] * signal[t + j - (W-1)/2], W odd.
    """
    T = signal.shape[0]
    W = kernel.shape[0]
    pad = W // 2
    padded = np.zeros(T + 2 * pad)
    padded[pad:pad + T] = signal
    out = np.zeros(T)
    for j in range(W):
        out += kernel[j] * padded[j:j + T]
    return out


def conv1d_same_multi(signal, kernels):
    """conv1d_same of one signal against a bank of kernels.

    signal: (T,), kernels: (F, W) -> (T, F).
    """
    T = signal.shape[0]
    F, W = kernels.shape
    pad = W // 2
    padded = np.zeros(T + 2 * pad)
    padded[pad:pad + T] = signal
    out = np.zeros((T, F))
    for j in range(W):
        out += padded[j:j + T, None] * kernels[None, :, j][0]
    return out


def conv1d_same_multi_backward(dout, signal, kernels):
    """Backprop through conv1d_same_multi.

    dout: (T, F). Returns (dsignal (T,), dkernels (F, W)).
    """
    T = signal.shape[0]
    F, W = kernels.shape
    pad = W // 2
    padded = np.zeros(T + 2 * pad)
    padded[pad:pad + T] = signal
    dpadded = np.zeros(T + 2 * pad)
    dkernels = np.zeros((F, W))
    for j in range(W):
        dpadded[j:j + T] += dout @ kernels[:, j]
        dkernels[:, j] = dout.T @ padded[j:j + T]
    return dpadded[pad:pad + T], dkernels
