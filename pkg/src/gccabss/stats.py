"""Lagged correlation estimates and predictor-weighted autocorrelation functionals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .exceptions import PreconditionError
from .signals import SignalLike, as_signal

__all__ = [
    "REFERENCE_PREDICTOR_B",
    "LagCorrelation",
    "PredictorCoeffs",
    "estimate_lag_correlation",
    "combine_lag_correlations",
    "sign_table",
    "mspe_expansion_weights",
    "predictor_autocorrelation",
    "normalized_autocorrelations",
    "normalized_autocorrelations_from_acf",
]

# First-predictor coefficients b_1..b_5 of the reference simulation.
REFERENCE_PREDICTOR_B = (-0.4548, -1.0053, 1.1957, -0.5590, -0.3617)


@dataclass(frozen=True)
class LagCorrelation:
    """Estimated ``R[lag] = E{x[n] x[n-lag]^T}``.

    ``lag`` is an int for a single-lag estimate or a tuple of ``(lag, weight)``
    pairs for a weighted combination.
    """

    matrix: np.ndarray
    lag: object
    symmetrized: bool
    sample_count: int

    def __post_init__(self):
        m = np.atleast_2d(np.array(self.matrix, dtype=float))
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"correlation matrix must be square, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValueError("correlation matrix contains non-finite values")
        if self.symmetrized and not np.array_equal(m, m.T):
            raise ValueError("matrix flagged as symmetrized is not symmetric")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def symmetrize(self) -> "LagCorrelation":
        if self.symmetrized:
            return self
        m = self.matrix
        return LagCorrelation(0.5 * (m + m.T), self.lag, True, self.sample_count)

    def quadratic(self, w) -> float:
        w = np.asarray(w, dtype=float)
        return float(w @ self.matrix @ w)


@dataclass(frozen=True)
class PredictorCoeffs:
    """Coefficients of the two linear predictors, leading unit taps implicit.

    ``b`` weights ``y[n-1] .. y[n-P]`` and ``d`` weights ``y[n-1] .. y[n-P_d]``.
    """

    b: tuple
    d: tuple = (1.0,)

    def __post_init__(self):
        b = tuple(float(v) for v in np.ravel(self.b))
        d = tuple(float(v) for v in np.ravel(self.d))
        if len(b) < 1 or len(d) < 1:
            raise ValueError("predictors need at least one coefficient each")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(d))):
            raise ValueError("predictor coefficients must be finite")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "d", d)

    @property
    def P(self) -> int:
        return len(self.b)

    @property
    def P_d(self) -> int:
        return len(self.d)

    @property
    def q_c(self) -> float:
        return 1.0 + float(np.sum(np.square(self.b)))

    @property
    def a_c(self) -> float:
        return 1.0 + float(np.sum(np.square(self.d)))

    @property
    def max_lag(self) -> int:
        return max(self.P, self.P_d)

    @classmethod
    def from_dict(cls, d: Mapping) -> "PredictorCoeffs":
        return cls(b=tuple(d["b"]), d=tuple(d.get("d", (1.0,))))


def estimate_lag_correlation(x: SignalLike, lag: int, symmetrize: bool = False) -> LagCorrelation:
    """Sample estimate ``1/(N-lag) * sum_n x[n] x[n-lag]^T``."""
    data = as_signal(x).data
    n = data.shape[1]
    lag = int(lag)
    if lag < 0 or 2 * lag >= n:
        raise ValueError(f"lag must satisfy 0 <= lag < N/2 = {n / 2}, got {lag}")
    r = data[:, lag:] @ data[:, : n - lag].T / (n - lag)
    if symmetrize:
        r = 0.5 * (r + r.T)
    return LagCorrelation(r, lag, symmetrize, n)


def combine_lag_correlations(
    x: SignalLike, weights: Mapping[int, float] | Sequence, symmetrize: bool = True
) -> LagCorrelation:
    """Weighted sum ``sum_k c_k R[lag_k]`` of lagged correlation estimates.

    ``weights`` maps lag to weight, or is a sequence of ``(lag, weight)`` pairs.
    """
    items = list(weights.items()) if isinstance(weights, Mapping) else [tuple(p) for p in weights]
    if not items:
        raise ValueError("at least one (lag, weight) pair is required")
    sig = as_signal(x)
    total = np.zeros((sig.channel_count, sig.channel_count))
    for lag, c in items:
        total += float(c) * estimate_lag_correlation(sig, int(lag), symmetrize).matrix
    if symmetrize:
        total = 0.5 * (total + total.T)
    if len(items) == 1 and float(items[0][1]) == 1.0:
        lag_label = int(items[0][0])
    else:
        lag_label = tuple((int(k), float(c)) for k, c in items)
    return LagCorrelation(total, lag_label, symmetrize, sig.sample_count)


def sign_table(P: int) -> np.ndarray:
    """``s[p, q] = +1`` if ``p == 0`` or ``q == 0``, else ``-1``; shape ``(P+1, P+1)``."""
    s = -np.ones((P + 1, P + 1))
    s[0, :] = 1.0
    s[:, 0] = 1.0
    return s


def mspe_expansion_weights(coeffs: Sequence[float]) -> np.ndarray:
    """Matrix ``W[p, q] = s_pq c_p c_q`` for ``p != q`` (zero diagonal), ``c_0 = 1``."""
    c = np.r_[1.0, np.asarray(coeffs, dtype=float)]
    w = sign_table(len(c) - 1) * np.outer(c, c)
    np.fill_diagonal(w, 0.0)
    return w


def predictor_autocorrelation(acf: np.ndarray, coeffs: Sequence[float]) -> np.ndarray:
    """Predictor-weighted autocorrelation ``sum_{p != q} s_pq c_p c_q rho[|q-p|]``.

    ``acf`` has shape ``(max_lag + 1,)`` or ``(L, max_lag + 1)``. Evaluated as
    ``q_c rho[0] - u^T T(rho) u`` with ``u = [1, -c_1, ..., -c_P]`` and ``T``
    the Toeplitz autocorrelation matrix, i.e. the noise-free part of
    ``q_c E{y^2} - E{e^2}``.
    """
    acf = np.atleast_2d(np.asarray(acf, dtype=float))
    P = len(coeffs)
    if acf.shape[1] < P + 1:
        raise ValueError(f"need autocorrelation up to lag {P}, got {acf.shape[1] - 1}")
    u = np.r_[1.0, -np.asarray(coeffs, dtype=float)]
    lags = np.abs(np.subtract.outer(np.arange(P + 1), np.arange(P + 1)))
    q_c = float(u @ u)
    out = np.array([q_c * a[0] - u @ a[lags] @ u for a in acf])
    return out


def _sample_acf(sources: SignalLike, max_lag: int) -> np.ndarray:
    s = as_signal(sources).data
    n = s.shape[1]
    return np.stack([np.sum(s[:, k:] * s[:, : n - k], axis=1) / (n - k) for k in range(max_lag + 1)], axis=1)


def normalized_autocorrelations_from_acf(acf, coeffs: PredictorCoeffs, tol: float = 1e-6) -> np.ndarray:
    """Ratio ``r_hat / r_tilde`` per source from autocorrelation sequences.

    Raises :class:`PreconditionError` when some ``r_tilde <= tol * rho[0]``.
    """
    acf = np.atleast_2d(np.asarray(acf, dtype=float))
    r_hat = predictor_autocorrelation(acf, coeffs.b)
    r_tilde = predictor_autocorrelation(acf, coeffs.d)
    bad = np.flatnonzero(r_tilde <= tol * acf[:, 0])
    if bad.size:
        raise PreconditionError(
            f"second-predictor autocorrelation r_tilde is not positive for sources {bad.tolist()} "
            f"(values {r_tilde[bad].tolist()}); the normalization assumption is violated"
        )
    return r_hat / r_tilde


def normalized_autocorrelations(sources: SignalLike, coeffs: PredictorCoeffs, tol: float | None = None) -> np.ndarray:
    """Sample ``r_hat_l / r_tilde_l`` for every source row.

    With ``d = [1]`` the normalizer is ``r_tilde = 2 rho[1]``. The default
    tolerance treats ``r_tilde`` as vanishing when it is within three standard
    errors of zero for a white source, ``3 sum|d-weights| / sqrt(N)`` in units
    of source power (never below ``1e-6``).
    """
    sig = as_signal(sources)
    if tol is None:
        spread = np.abs(mspe_expansion_weights(coeffs.d)).sum()
        tol = max(1e-6, 3.0 * spread / np.sqrt(sig.sample_count))
    acf = _sample_acf(sig, coeffs.max_lag)
    return normalized_autocorrelations_from_acf(acf, coeffs, tol=tol)
