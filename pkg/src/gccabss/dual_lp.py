"""Blind source extraction with two linear predictors on the extractor output.

For ``y[n] = w^T x[n]`` two prediction errors are formed,

    e[n] = y[n] - sum_{p=1..P}   b_p y[n-p]
    f[n] = y[n] - sum_{p=1..P_d} d_p y[n-p]

and the extractor minimizes

    J(w) = (q_c E{y^2} - E{e^2}) / (a_c E{y^2} - E{f^2}),

with ``q_c = 1 + sum b_p^2`` and ``a_c = 1 + sum d_p^2``. Subtracting the
prediction error power from the scaled output power cancels every zero-lag
product, so additive white noise drops out of both numerator and
denominator. The minimum picks the source with the smallest ratio
``r_hat / r_tilde`` (see :func:`gccabss.stats.normalized_autocorrelations`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .exceptions import PreconditionError
from .signals import SignalLike, as_signal
from .stats import PredictorCoeffs

__all__ = [
    "DualLPState",
    "DualRun",
    "init_dual",
    "step_dual",
    "run_dual",
    "dual_terms",
    "dual_cost",
    "dual_gradient",
]

DENOMINATOR_FLOOR = 1e-9


@dataclass
class DualLPState:
    w: np.ndarray
    coeffs: PredictorCoeffs
    mu: float
    beta_e: float
    beta_y: float
    beta_f: float
    warmup: int
    normalize: bool
    xbuf: np.ndarray
    ybuf: np.ndarray
    stats: np.ndarray = field(repr=False)  # [sigma_e, sigma_y, sigma_f, n, skipped]

    @property
    def q_c(self) -> float:
        return self.coeffs.q_c

    @property
    def a_c(self) -> float:
        return self.coeffs.a_c

    @property
    def sigma_e(self) -> float:
        return float(self.stats[0])

    @property
    def sigma_y(self) -> float:
        return float(self.stats[1])

    @property
    def sigma_f(self) -> float:
        return float(self.stats[2])

    @property
    def n(self) -> int:
        return int(self.stats[3])

    @property
    def skipped(self) -> int:
        return int(self.stats[4])

    def copy(self) -> "DualLPState":
        return DualLPState(
            self.w.copy(), self.coeffs, self.mu, self.beta_e, self.beta_y, self.beta_f,
            self.warmup, self.normalize, self.xbuf.copy(), self.ybuf.copy(), self.stats.copy(),
        )

    def _args(self):
        c = self.coeffs
        return (
            np.asarray(c.b), np.asarray(c.d), c.q_c, c.a_c, self.mu,
            self.beta_e, self.beta_y, self.beta_f, float(self.warmup), DENOMINATOR_FLOOR, self.normalize,
        )


def init_dual(
    M: int,
    b,
    d=(1.0,),
    mu: float = 0.0015,
    betas=0.975,
    seed=None,
    warmup: int = 100,
    normalize: bool = False,
    w0=None,
) -> DualLPState:
    """Fresh dual-predictor extractor.

    ``betas`` is one forgetting factor for all three power estimates or a
    triple ``(beta_e, beta_y, beta_f)``. ``w`` starts as a seeded random unit
    vector, all power estimates at 1. The default ``d = [1]`` is the one-step
    predictor with ``a_c = 2``.
    """
    coeffs = b if isinstance(b, PredictorCoeffs) else PredictorCoeffs(b=tuple(np.ravel(b)), d=tuple(np.ravel(d)))
    if M < 1:
        raise ValueError("M must be >= 1")
    if np.ndim(betas) == 0:
        betas = (float(betas),) * 3
    if len(betas) != 3:
        raise ValueError("betas must be a scalar or a (beta_e, beta_y, beta_f) triple")
    for name, beta in zip(("beta_e", "beta_y", "beta_f"), betas):
        if not 0.0 <= beta < 1.0:
            raise ValueError(f"{name} must satisfy 0 <= beta < 1, got {beta}")
    if not mu > 0:
        raise ValueError(f"step size must be positive, got {mu}")
    K = coeffs.max_lag
    if warmup < K + 1:
        raise ValueError(f"warmup must be at least max(P, P_d) + 1 = {K + 1}")
    if w0 is None:
        w = np.random.default_rng(seed).standard_normal(M)
        w /= np.linalg.norm(w)
    else:
        w = np.array(w0, dtype=float).ravel()
        if w.size != M:
            raise ValueError("w0 must have length M")
    return DualLPState(
        w=w, coeffs=coeffs, mu=float(mu),
        beta_e=float(betas[0]), beta_y=float(betas[1]), beta_f=float(betas[2]),
        warmup=int(warmup), normalize=bool(normalize),
        xbuf=np.zeros((K, M)), ybuf=np.zeros(K), stats=np.array([1.0, 1.0, 1.0, 0.0, 0.0]),
    )


def step_dual(state: DualLPState, x_n) -> tuple[float, float, float, DualLPState]:
    """Consume one sample; returns ``(y_n, e_n, f_n, state)`` with ``state`` updated in place."""
    x = np.ascontiguousarray(x_n, dtype=float).ravel()
    if x.size != state.w.size:
        raise ValueError(f"expected a sample of length {state.w.size}, got {x.size}")
    out = np.empty(3)
    _kernels.dual_step(state.w, state.xbuf, state.ybuf, state.stats, x, *state._args(), out)
    return float(out[0]), float(out[1]), float(out[2]), state


@dataclass(frozen=True)
class DualRun:
    y: np.ndarray
    e: np.ndarray
    f: np.ndarray
    sigmas: np.ndarray  # (N, 3): sigma_e, sigma_y, sigma_f
    w_history: np.ndarray  # (N, M)
    state: DualLPState


def run_dual(state: DualLPState, x: SignalLike) -> DualRun:
    """Feed every sample of ``x`` through :func:`step_dual` (compiled loop)."""
    X = np.ascontiguousarray(as_signal(x).data)
    if X.shape[0] != state.w.size:
        raise ValueError(f"expected {state.w.size} channels, got {X.shape[0]}")
    N = X.shape[1]
    yef = np.empty((N, 3))
    sig = np.empty((N, 3))
    W = np.empty((N, X.shape[0]))
    _kernels.dual_run(state.w, state.xbuf, state.ybuf, state.stats, X, *state._args(), yef, sig, W)
    return DualRun(yef[:, 0].copy(), yef[:, 1].copy(), yef[:, 2].copy(), sig, W, state)


@dataclass(frozen=True)
class DualTerms:
    """Sample moments of one window, all averaged over ``n = K .. N-1``."""

    Ey2: float
    Ee2: float
    Ef2: float
    Eyx: np.ndarray
    Eexh: np.ndarray
    Efxt: np.ndarray
    q_c: float
    a_c: float

    @property
    def numerator(self) -> float:
        return self.q_c * self.Ey2 - self.Ee2

    @property
    def denominator(self) -> float:
        return self.a_c * self.Ey2 - self.Ef2


def _filtered(X, coeffs, K):
    N = X.shape[1]
    n = np.arange(K, N)
    x0 = X[:, n]
    xh = x0 - sum(bp * X[:, n - p] for p, bp in enumerate(coeffs.b, start=1))
    xt = x0 - sum(dp * X[:, n - p] for p, dp in enumerate(coeffs.d, start=1))
    return x0, xh, xt


def dual_terms(w, x: SignalLike, coeffs: PredictorCoeffs) -> DualTerms:
    X = as_signal(x).data
    w = np.asarray(w, dtype=float)
    K = coeffs.max_lag
    if X.shape[1] <= K + 1:
        raise ValueError("signal too short for the predictor lengths")
    x0, xh, xt = _filtered(X, coeffs, K)
    y = w @ x0
    e = w @ xh
    f = w @ xt
    return DualTerms(
        Ey2=float(np.mean(y * y)), Ee2=float(np.mean(e * e)), Ef2=float(np.mean(f * f)),
        Eyx=np.mean(y * x0, axis=1), Eexh=np.mean(e * xh, axis=1), Efxt=np.mean(f * xt, axis=1),
        q_c=coeffs.q_c, a_c=coeffs.a_c,
    )


def dual_cost(w, x: SignalLike, coeffs: PredictorCoeffs) -> float:
    """Batch ``(q_c E{y^2} - E{e^2}) / (a_c E{y^2} - E{f^2})`` over the full signal."""
    t = dual_terms(w, x, coeffs)
    if t.denominator <= 0:
        raise PreconditionError(
            f"dual-predictor denominator a_c E{{y^2}} - E{{f^2}} = {t.denominator:.3g} is not positive; "
            "the positivity assumption on r_tilde is violated"
        )
    return t.numerator / t.denominator


def dual_gradient(w, x: SignalLike, coeffs: PredictorCoeffs) -> np.ndarray:
    """Exact gradient of :func:`dual_cost` on the same sample window."""
    t = dual_terms(w, x, coeffs)
    D = t.denominator
    if D <= 0:
        raise PreconditionError("dual-predictor denominator is not positive")
    return 2.0 / D**2 * ((t.q_c * t.Eyx - t.Eexh) * D - t.numerator * (t.a_c * t.Eyx - t.Efxt))
