"""Numba-jitted twins of the kernels in `kernels_numpy`.

Same signatures, same math. fastmath stays off so reductions keep IEEE
ordering and runs are bit-reproducible for a fixed backend.
"""

import numpy as np
from numba import njit

_JIT = dict(cache=True, fastmath=False, nogil=True)


@njit(**_JIT)
def lstm_forward(x, wx, wh, b, reverse=False):
    T = x.shape[0]
    H = wh.shape[1]
    wxT = np.ascontiguousarray(wx.T)
    xg = np.dot(x, wxT) + b
    h_seq = np.zeros((T, H))
    c_seq = np.zeros((T, H))
    gates = np.zeros((T, 4 * H))
    h_prev = np.zeros(H)
    c_prev = np.zeros(H)
    for step in range(T):
        t = T - 1 - step if reverse else step
        pre = xg[t] + np.dot(wh, h_prev)
        for k in range(H):
            i = 1.0 / (1.0 + np.exp(-pre[k]))
            f = 1.0 / (1.0 + np.exp(-pre[H + k]))
            g = np.tanh(pre[2 * H + k])
            o = 1.0 / (1.0 + np.exp(-pre[3 * H + k]))
            c = f * c_prev[k] + i * g
            h = o * np.tanh(c)
            gates[t, k] = i
            gates[t, H + k] = f
            gates[t, 2 * H + k] = g
            gates[t, 3 * H + k] = o
            c_seq[t, k] = c
            h_seq[t, k] = h
        h_prev = h_seq[t]
        c_prev = c_seq[t]
    return h_seq, c_seq, gates


@njit(**_JIT)
def lstm_backward(dh_out, x, h_seq, c_seq, gates, wx, wh, reverse=False):
    T = x.shape[0]
    H = wh.shape[1]
    whT = np.ascontiguousarray(wh.T)
    dG = np.zeros((T, 4 * H))
    dh_next = np.zeros(H)
    dc_next = np.zeros(H)
    zeros = np.zeros(H)
    for step in range(T):
        t = step if reverse else T - 1 - step
        if reverse:
            c_prev = c_seq[t + 1] if t + 1 < T else zeros
        else:
            c_prev = c_seq[t - 1] if t > 0 else zeros
        for k in range(H):
            i = gates[t, k]
            f = gates[t, H + k]
            g = gates[t, 2 * H + k]
            o = gates[t, 3 * H + k]
            tc = np.tanh(c_seq[t, k])
            dh = dh_out[t, k] + dh_next[k]
            do = dh * tc
            dc = dc_next[k] + dh * o * (1.0 - tc * tc)
            di = dc * g
            df = dc * c_prev[k]
            dg = dc * i
            dc_next[k] = dc * f
            dG[t, k] = di * i * (1.0 - i)
            dG[t, H + k] = df * f * (1.0 - f)
            dG[t, 2 * H + k] = dg * (1.0 - g * g)
            dG[t, 3 * H + k] = do * o * (1.0 - o)
        dh_next = np.dot(whT, dG[t])
    h_prev_seq = np.zeros((T, H))
    if reverse:
        h_prev_seq[:T - 1] = h_seq[1:]
    else:
        h_prev_seq[1:] = h_seq[:T - 1]
    dGT = np.ascontiguousarray(dG.T)
    dx = np.dot(dG, wx)
    dwx = np.dot(dGT, x)
    dwh = np.dot(dGT, h_prev_seq)
    db = np.zeros(4 * H)
    for t in range(T):
        db += dG[t]
    return dx, dwx, dwh, db


@njit(**_JIT)
def conv1d_same(signal, kernel):
    T = signal.shape[0]
    W = kernel.shape[0]
    pad = W // 2
    out = np.zeros(T)
    for t in range(T):
        acc = 0.0
        for j in range(W):
            src = t + j - pad
            if 0 <= src < T:
                acc += kernel[j] * signal[src]
        out[t] = acc
    return out


@njit(**_JIT)
def conv1d_same_multi(signal, kernels):
    T = signal.shape[0]
    F, W = kernels.shape
    pad = W // 2
    out = np.zeros((T, F))
    for t in range(T):
        for m in range(F):
            acc = 0.0
            for j in range(W):
                src = t + j - pad
                if 0 <= src < T:
                    acc += kernels[m, j] * signal[src]
            out[t, m] = acc
    return out


@njit(**_JIT)
def conv1d_same_multi_backward(dout, signal, kernels):
    T = signal.shape[0]
    F, W = kernels.shape
    pad = W // 2
    dsignal = np.zeros(T)
    dkernels = np.zeros((F, W))
    for t in range(T):
        for m in range(F):
            d = dout[t, m]
            for j in range(W):
                src = t + j - pad
                if 0 <= src < T:
                    dsignal[src] += d * kernels[m, j]
                    dkernels[m, j] += d * signal[src]
    return dsignal, dkernels
