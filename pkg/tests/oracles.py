"""Independent reference computations used by the tests."""

import mpmath
import numpy as np


def charpoly_eigenvalues(N, D, dps=60):
    """Roots of det(N - lam D) from an interpolated characteristic polynomial.

    The polynomial has degree n; it is sampled at n + 1 points in high
    precision, its coefficients recovered by solving the Vandermonde system,
    and the roots found by ``mpmath.polyroots``.
    """
    n = N.shape[0]
    with mpmath.workdps(dps):
        Nm = mpmath.matrix(N.tolist())
        Dm = mpmath.matrix(D.tolist())
        pts = [mpmath.mpf(k) - mpmath.mpf(n) / 2 for k in range(n + 1)]
        vals = [mpmath.det(Nm - t * Dm) for t in pts]
        V = mpmath.matrix([[t**j for j in range(n, -1, -1)] for t in pts])
        coef = mpmath.lu_solve(V, mpmath.matrix(vals))
        roots = mpmath.polyroots([coef[i] for i in range(n + 1)], maxsteps=500, extraprec=4 * dps)
        out = sorted((float(mpmath.re(r)) for r in roots), reverse=True)
    return np.array(out)


def direct_update(w, x, x1, x_lags, y1, y_lags, sigma_prev, b, mu, beta):
    """One update of the weighted-lag ascent written out from its formula.

    ``x1``/``y1`` are the mixture and output at ``n - 1``; ``x_lags[k]`` and
    ``y_lags[k]`` are at ``n - 2 - k``. Returns ``(y, sigma_y, w_new)``.
    """
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    y = float(w @ x)
    sigma = beta * sigma_prev + (1 - beta) * y * y1
    e0 = sum(bk * yk for bk, yk in zip(b, y_lags))
    xh = sum(bk * np.asarray(xk, dtype=float) for bk, xk in zip(b, x_lags))
    grad = (y * xh + x * e0) * (y * y1) - (y * e0) * (y * np.asarray(x1) + x * y1)
    w_new = w + mu / sigma**2 * grad
    return y, sigma, w_new / np.linalg.norm(w_new)


def dual_update(w, x, x_lags, y_lags, sig, b, d, mu, betas):
    """One dual-predictor update; ``x_lags[k]``, ``y_lags[k]`` are at ``n - 1 - k``."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    y = float(w @ x)
    e = y - sum(bp * yp for bp, yp in zip(b, y_lags))
    f = y - sum(dp * yp for dp, yp in zip(d, y_lags))
    s_e = betas[0] * sig[0] + (1 - betas[0]) * e * e
    s_y = betas[1] * sig[1] + (1 - betas[1]) * y * y
    s_f = betas[2] * sig[2] + (1 - betas[2]) * f * f
    q_c = 1 + sum(v * v for v in b)
    a_c = 1 + sum(v * v for v in d)
    xh = x - sum(bp * np.asarray(xp) for bp, xp in zip(b, x_lags))
    xt = x - sum(dp * np.asarray(xp) for dp, xp in zip(d, x_lags))
    den = a_c * s_y - s_f
    num = q_c * s_y - s_e
    g = (q_c * y * x - e * xh) * den - num * (a_c * y * x - f * xt)
    w_new = w - 2 * mu / den**2 * g
    return (y, e, f), (s_e, s_y, s_f), w_new


def central_difference(fun, w, h=1e-5):
    g = np.empty_like(w)
    for i in range(w.size):
        e = np.zeros_like(w)
        e[i] = h
        g[i] = (fun(w + e) - fun(w - e)) / (2 * h)
    return g
