"""Online GCCA extraction by stochastic gradient ascent on a weighted-lag ratio.

The extractor maximizes

    J(w) = E{y[n] e0[n]} / E{y[n] y[n-1]},   e0[n] = sum_k b_k y[n-1-k],

so the numerator correlates the output with a fixed weighted sum of its
samples at lags ``2 .. P+1`` and the denominator normalizes by the lag-one
self-correlation. Neither involves zero-lag products, so white noise on the
mixtures does not bias the stationary point.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .signals import SignalLike, as_signal

__all__ = [
    "DirectExtractorState",
    "DirectRun",
    "init_direct",
    "step_direct",
    "run_direct",
    "direct_cost",
    "direct_gradient",
]

SIGMA_FLOOR = 1e-9


@dataclass
class DirectExtractorState:
    w: np.ndarray
    b: np.ndarray
    mu: float
    beta: float
    warmup: int
    xbuf: np.ndarray
    ybuf: np.ndarray
    stats: np.ndarray = field(repr=False)  # [sigma_y, n, skipped]

    @property
    def sigma_y(self) -> float:
        return float(self.stats[0])

    @property
    def n(self) -> int:
        return int(self.stats[1])

    @property
    def skipped(self) -> int:
        return int(self.stats[2])

    @property
    def P(self) -> int:
        return self.b.shape[0]

    def copy(self) -> "DirectExtractorState":
        return DirectExtractorState(
            self.w.copy(), self.b.copy(), self.mu, self.beta, self.warmup,
            self.xbuf.copy(), self.ybuf.copy(), self.stats.copy(),
        )


def _random_unit(M: int, seed) -> np.ndarray:
    w = np.random.default_rng(seed).standard_normal(M)
    return w / np.linalg.norm(w)


def init_direct(M: int, b, mu: float, beta: float, seed=None, warmup: int = 100, w0=None) -> DirectExtractorState:
    """Fresh extractor with a seeded random unit-norm ``w`` and ``sigma_y = 1``.

    ``b`` weights the output at lags ``2 .. P+1``. Updates of ``w`` start once
    ``warmup`` samples (at least ``P + 2``) have been seen.
    """
    b = np.asarray(b, dtype=float).ravel()
    if M < 1:
        raise ValueError("M must be >= 1")
    if b.size < 1 or not np.all(np.isfinite(b)):
        raise ValueError("b needs at least one finite coefficient")
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"forgetting factor must satisfy 0 <= beta < 1, got {beta}")
    if not mu > 0:
        raise ValueError(f"step size must be positive, got {mu}")
    if warmup < b.size + 2:
        raise ValueError(f"warmup must be at least P + 2 = {b.size + 2}")
    if w0 is None:
        w = _random_unit(M, seed)
    else:
        w = np.array(w0, dtype=float).ravel()
        if w.size != M or not np.linalg.norm(w) > 0:
            raise ValueError("w0 must be a nonzero vector of length M")
        w /= np.linalg.norm(w)
    P = b.size
    return DirectExtractorState(
        w=w, b=b, mu=float(mu), beta=float(beta), warmup=int(warmup),
        xbuf=np.zeros((P + 1, M)), ybuf=np.zeros(P + 1), stats=np.array([1.0, 0.0, 0.0]),
    )


def step_direct(state: DirectExtractorState, x_n) -> tuple[float, DirectExtractorState]:
    """Consume one mixture sample; updates ``state`` in place and returns ``(y_n, state)``."""
    x = np.ascontiguousarray(x_n, dtype=float).ravel()
    if x.size != state.w.size:
        raise ValueError(f"expected a sample of length {state.w.size}, got {x.size}")
    y = _kernels.direct_step(
        state.w, state.xbuf, state.ybuf, state.stats, x, state.b,
        state.mu, state.beta, float(state.warmup), SIGMA_FLOOR,
    )
    return float(y), state


@dataclass(frozen=True)
class DirectRun:
    y: np.ndarray
    sigma_y: np.ndarray
    w_history: np.ndarray  # (N, M), w after each sample
    state: DirectExtractorState


def run_direct(state: DirectExtractorState, x: SignalLike) -> DirectRun:
    """Feed every sample of ``x`` through :func:`step_direct` (compiled loop)."""
    X = np.ascontiguousarray(as_signal(x).data)
    if X.shape[0] != state.w.size:
        raise ValueError(f"expected {state.w.size} channels, got {X.shape[0]}")
    N = X.shape[1]
    y = np.empty(N)
    sig = np.empty(N)
    W = np.empty((N, X.shape[0]))
    _kernels.direct_run(
        state.w, state.xbuf, state.ybuf, state.stats, X, state.b,
        state.mu, state.beta, float(state.warmup), SIGMA_FLOOR, y, sig, W,
    )
    return DirectRun(y, sig, W, state)


def _direct_terms(w, x, b):
    X = as_signal(x).data
    b = np.asarray(b, dtype=float).ravel()
    P = b.size
    N = X.shape[1]
    if N <= P + 2:
        raise ValueError("signal too short for the lag window")
    n = np.arange(P + 1, N)
    x0 = X[:, n]
    x1 = X[:, n - 1]
    xh = sum(b[k] * X[:, n - k - 2] for k in range(P))
    y = w @ x0
    y1 = w @ x1
    e0 = w @ xh
    return x0, x1, xh, y, y1, e0


def direct_cost(w, x: SignalLike, b) -> float:
    """Sample ``E{y e0} / E{y y[n-1]}`` over samples ``n = P+1 .. N-1``."""
    w = np.asarray(w, dtype=float)
    _, _, _, y, y1, e0 = _direct_terms(w, x, b)
    return float(np.mean(y * e0) / np.mean(y * y1))


def direct_gradient(w, x: SignalLike, b) -> np.ndarray:
    """Exact gradient of :func:`direct_cost` on the same sample window."""
    w = np.asarray(w, dtype=float)
    x0, x1, xh, y, y1, e0 = _direct_terms(w, x, b)
    num = np.mean(y * e0)
    den = np.mean(y * y1)
    d_num = np.mean(y * xh + x0 * e0, axis=1)
    d_den = np.mean(y * x1 + x0 * y1, axis=1)
    return (d_num * den - num * d_den) / den**2
