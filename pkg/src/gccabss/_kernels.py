"""Compiled per-sample update kernels shared by the step API and the batch runners.

Buffers are newest-first: ``xbuf[k]`` holds ``x[n-1-k]`` and ``ybuf[k]``
holds ``y[n-1-k]`` when sample ``n`` arrives.
"""

import numpy as np
from numba import njit

# direct state layout: [sigma_y, n, skipped]
# dual state layout:   [sigma_e, sigma_y, sigma_f, n, skipped]


@njit(cache=True)
def _shift(xbuf, ybuf, x, y):
    for k in range(xbuf.shape[0] - 1, 0, -1):
        for i in range(xbuf.shape[1]):
            xbuf[k, i] = xbuf[k - 1, i]
        ybuf[k] = ybuf[k - 1]
    for i in range(xbuf.shape[1]):
        xbuf[0, i] = x[i]
    ybuf[0] = y


@njit(cache=True)
def _normalize(w):
    s = 0.0
    for i in range(w.shape[0]):
        s += w[i] * w[i]
    s = np.sqrt(s)
    if s > 0.0:
        for i in range(w.shape[0]):
            w[i] /= s


@njit(cache=True)
def direct_step(w, xbuf, ybuf, state, x, b, mu, beta, warmup, floor):
    M = w.shape[0]
    P = b.shape[0]
    y = 0.0
    for i in range(M):
        y += w[i] * x[i]
    y1 = ybuf[0]
    sigma_y = beta * state[0] + (1.0 - beta) * y * y1
    state[0] = sigma_y
    if state[1] >= warmup:
        if abs(sigma_y) < floor:
            state[2] += 1.0
        else:
            e0 = 0.0
            for k in range(P):
                e0 += b[k] * ybuf[k + 1]
            gain = mu / (sigma_y * sigma_y)
            yy1 = y * y1
            ye0 = y * e0
            for i in range(M):
                xh = 0.0
                for k in range(P):
                    xh += b[k] * xbuf[k + 1, i]
                grad = (y * xh + x[i] * e0) * yy1 - ye0 * (y * xbuf[0, i] + x[i] * y1)
                w[i] += gain * grad
            _normalize(w)
    _shift(xbuf, ybuf, x, y)
    state[1] += 1.0
    return y


@njit(cache=True)
def dual_step(w, xbuf, ybuf, state, x, b, d, q_c, a_c, mu, beta_e, beta_y, beta_f, warmup, floor, normalize, out):
    M = w.shape[0]
    P = b.shape[0]
    Pd = d.shape[0]
    y = 0.0
    for i in range(M):
        y += w[i] * x[i]
    e = y
    for k in range(P):
        e -= b[k] * ybuf[k]
    f = y
    for k in range(Pd):
        f -= d[k] * ybuf[k]
    state[0] = beta_e * state[0] + (1.0 - beta_e) * e * e
    state[1] = beta_y * state[1] + (1.0 - beta_y) * y * y
    state[2] = beta_f * state[2] + (1.0 - beta_f) * f * f
    if state[3] >= warmup:
        den = a_c * state[1] - state[2]
        if abs(den) < floor:
            state[4] += 1.0
        else:
            num = q_c * state[1] - state[0]
            gain = 2.0 * mu / (den * den)
            for i in range(M):
                xh = x[i]
                for k in range(P):
                    xh -= b[k] * xbuf[k, i]
                xt = x[i]
                for k in range(Pd):
                    xt -= d[k] * xbuf[k, i]
                grad = (q_c * y * x[i] - e * xh) * den - num * (a_c * y * x[i] - f * xt)
                w[i] -= gain * grad
        if normalize:
            _normalize(w)
    _shift(xbuf, ybuf, x, y)
    state[3] += 1.0
    out[0] = y
    out[1] = e
    out[2] = f


@njit(cache=True)
def direct_run(w, xbuf, ybuf, state, X, b, mu, beta, warmup, floor, y_out, sigma_out, w_out):
    """Process samples ``X[:, n]`` in order, recording per-sample telemetry."""
    N = X.shape[1]
    x = np.empty(X.shape[0])
    for n in range(N):
        for i in range(X.shape[0]):
            x[i] = X[i, n]
        y_out[n] = direct_step(w, xbuf, ybuf, state, x, b, mu, beta, warmup, floor)
        sigma_out[n] = state[0]
        for i in range(w.shape[0]):
            w_out[n, i] = w[i]


@njit(cache=True)
def dual_run(w, xbuf, ybuf, state, X, b, d, q_c, a_c, mu, beta_e, beta_y, beta_f, warmup, floor, normalize,
             yef_out, sigma_out, w_out):
    N = X.shape[1]
    x = np.empty(X.shape[0])
    out = np.empty(3)
    for n in range(N):
        for i in range(X.shape[0]):
            x[i] = X[i, n]
        dual_step(w, xbuf, ybuf, state, x, b, d, q_c, a_c, mu, beta_e, beta_y, beta_f, warmup, floor,
                  normalize, out)
        for j in range(3):
            yef_out[n, j] = out[j]
            sigma_out[n, j] = state[j]
        for i in range(w.shape[0]):
            w_out[n, i] = w[i]
