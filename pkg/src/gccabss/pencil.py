"""Batch CCA/GCCA extraction through a symmetric-definite correlation pencil.

The extraction vector maximizes the ratio ``w^T R[delta1] w / w^T R[delta0] w``.
With ``delta0 = 0`` this is the classical CCA criterion; with a nonzero
``delta0`` the white-noise contribution, which only lives at lag zero, drops
out of both quadratic forms.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.linalg import solve_triangular

from .exceptions import PreconditionError
from .signals import SignalLike, SignalMatrix, as_signal
from .stats import LagCorrelation, combine_lag_correlations, estimate_lag_correlation

__all__ = [
    "PencilSolution",
    "BatchExtraction",
    "jacobi_eigh",
    "solve_pencil",
    "pencil_cost",
    "extract_batch",
    "deflate",
    "project_signal_subspace",
    "extract_sequential",
    "SequentialExtraction",
]

_TIE_RTOL = 1e-10


@dataclass(frozen=True)
class PencilSolution:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, unit norm
    numerator_lags: tuple
    denominator_lags: tuple

    @property
    def top(self):
        return self.eigenvalues[0], self.eigenvectors[:, 0]


def _lags_of(lc: LagCorrelation) -> tuple:
    if isinstance(lc.lag, tuple):
        return tuple(k for k, _ in lc.lag)
    return (int(lc.lag),)


def jacobi_eigh(C, tol: float = 1e-15, max_sweeps: int = 100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, V)`` unsorted, with ``C = V diag(eigenvalues) V^T``.
    """
    a = np.array(C, dtype=float)
    n = a.shape[0]
    v = np.eye(n)
    scale = np.linalg.norm(a)
    if n == 1 or scale == 0.0:
        return np.diag(a).copy(), v
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(a, -1) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0)) if theta != 0 else 1.0
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J for the rotation in the (p, q) plane
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        warnings.warn("Jacobi iteration did not reach tolerance", RuntimeWarning, stacklevel=2)
    return np.diag(a).copy(), v


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    for j in range(v.shape[1]):
        col = v[:, j]
        nz = np.flatnonzero(np.abs(col) > 1e-14 * np.max(np.abs(col)))
        if nz.size and col[nz[0]] < 0:
            v[:, j] = -col
    return v


def _as_matrix(m) -> tuple[np.ndarray, tuple]:
    if isinstance(m, LagCorrelation):
        if not m.symmetrized:
            raise PreconditionError(f"pencil matrices must be symmetrized (lag {m.lag} is not)")
        return m.matrix, _lags_of(m)
    a = np.atleast_2d(np.asarray(m, dtype=float))
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"pencil matrix must be square, got {a.shape}")
    if not np.allclose(a, a.T, rtol=0, atol=1e-12 * max(1.0, np.abs(a).max())):
        raise PreconditionError("pencil matrices must be symmetric")
    return 0.5 * (a + a.T), ()


def solve_pencil(numerator, denominator) -> PencilSolution:
    """All generalized eigenpairs of ``numerator w = lambda denominator w``.

    The denominator is Cholesky-factored as ``D = L L^T`` and the symmetric
    matrix ``L^-1 N L^-T`` is diagonalized by :func:`jacobi_eigh`. Eigenvalues
    are returned in descending order; eigenvectors are unit-norm columns whose
    first nonzero entry is positive.
    """
    N, num_lags = _as_matrix(numerator)
    D, den_lags = _as_matrix(denominator)
    if N.shape != D.shape:
        raise ValueError(f"pencil matrices differ in shape: {N.shape} vs {D.shape}")

    d_eigs = np.linalg.eigvalsh(D)
    trace = np.trace(D)
    if trace <= 0 or d_eigs[0] <= 1e-10 * trace:
        raise PreconditionError(
            "pencil denominator is not positive definite "
            f"(smallest eigenvalue {d_eigs[0]:.3g}, trace {trace:.3g})"
        )
    L = np.linalg.cholesky(D)
    Linv_N = solve_triangular(L, N, lower=True)
    C = solve_triangular(L, Linv_N.T, lower=True)
    C = 0.5 * (C + C.T)
    lam, U = jacobi_eigh(C)
    W = solve_triangular(L.T, U, lower=False)
    W /= np.linalg.norm(W, axis=0, keepdims=True)
    W = _canonical_sign(W)

    keys = [tuple(W[:, j]) for j in range(W.shape[1])]
    order = sorted(range(len(lam)), key=lambda j: (-lam[j], keys[j]))
    lam = lam[order]
    W = W[:, order]
    gaps = np.abs(np.diff(lam))
    if gaps.size and np.any(gaps <= _TIE_RTOL * max(1.0, np.abs(lam).max())):
        warnings.warn(
            "pencil has (near-)repeated eigenvalues; the extracted direction is not unique",
            RuntimeWarning,
            stacklevel=2,
        )
    return PencilSolution(lam, W, num_lags, den_lags)


def pencil_cost(w, numerator, denominator) -> float:
    """Correlation ratio ``w^T N w / w^T D w``."""
    w = np.asarray(w, dtype=float)
    N = numerator.matrix if isinstance(numerator, LagCorrelation) else np.asarray(numerator)
    D = denominator.matrix if isinstance(denominator, LagCorrelation) else np.asarray(denominator)
    return float((w @ N @ w) / (w @ D @ w))


def _lag_weights(spec, default: int) -> dict:
    if spec is None:
        return {default: 1.0}
    if isinstance(spec, Mapping):
        return {int(k): float(v) for k, v in spec.items()}
    return {int(k): float(v) for k, v in spec}


def _pencil_matrices(x, delta0, delta1, mode, numerator_weights=None, denominator_weights=None):
    if mode not in ("cca", "gcca"):
        raise ValueError(f"mode must be 'cca' or 'gcca', got {mode!r}")
    if mode == "cca":
        if denominator_weights is not None and set(_lag_weights(denominator_weights, 0)) != {0}:
            raise ValueError("cca mode normalizes by the zero-lag correlation only")
        delta0 = 0
    num_w = _lag_weights(numerator_weights, delta1)
    den_w = _lag_weights(denominator_weights, delta0)
    if mode == "gcca" and 0 in den_w:
        raise ValueError("gcca mode needs a nonzero denominator lag")
    if set(num_w) == set(den_w) and len(num_w) == 1:
        raise ValueError("numerator and denominator lags must differ")
    return combine_lag_correlations(x, num_w), combine_lag_correlations(x, den_w)


@dataclass(frozen=True)
class BatchExtraction:
    w: np.ndarray
    y: SignalMatrix
    eigenvalue: float
    solution: PencilSolution

    def __iter__(self):
        return iter((self.w, self.y))


def extract_batch(
    x: SignalLike,
    delta0: int = 1,
    delta1: int = 2,
    mode: str = "gcca",
    numerator_weights=None,
    denominator_weights=None,
) -> BatchExtraction:
    """Extract the source with the largest normalized autocorrelation.

    ``mode="cca"`` normalizes by ``R[0]`` (``delta0`` is ignored),
    ``mode="gcca"`` by ``R[delta0]`` with ``delta0 != 0``. Optional weight
    mappings ``{lag: weight}`` replace the single-lag matrices.
    """
    sig = as_signal(x)
    if mode == "gcca" and denominator_weights is None and delta0 == 0:
        raise ValueError("gcca mode requires delta0 != 0")
    if numerator_weights is None and denominator_weights is None and mode == "gcca" and delta0 == delta1:
        raise ValueError("delta1 must differ from delta0")
    num, den = _pencil_matrices(sig, delta0, delta1, mode, numerator_weights, denominator_weights)
    sol = solve_pencil(num, den)
    lam, w = sol.top
    y = SignalMatrix(w @ sig.data)
    return BatchExtraction(w=w, y=y, eigenvalue=float(lam), solution=sol)


def _deflation_gain(xs: np.ndarray, yv: np.ndarray, lag: int) -> np.ndarray:
    n = yv.size
    denom = float(np.dot(yv[lag:], yv[: n - lag]))
    power = float(np.dot(yv, yv))
    if power == 0.0 or abs(denom) <= 1e-12 * power:
        raise PreconditionError(f"lag-{lag} correlation of the extracted signal vanishes; cannot deflate")
    return xs[:, lag:] @ yv[: n - lag] / denom


def deflate(x: SignalLike, y: SignalLike, lag: int = 1) -> SignalMatrix:
    """Remove the contribution of ``y`` from ``x`` by lagged regression.

    ``a = sum_n x[n] y[n-lag] / sum_n y[n] y[n-lag]``; returns ``x - a y``.
    Using a nonzero lag keeps the white noise out of the estimate of ``a``.
    """
    xs = as_signal(x).data
    ys = as_signal(y).data
    if ys.shape[0] != 1:
        raise ValueError("y must be a single channel")
    if ys.shape[1] != xs.shape[1]:
        raise ValueError("x and y must have the same number of samples")
    if lag < 1:
        raise ValueError("deflation lag must be >= 1")
    a = _deflation_gain(xs, ys[0], lag)
    return SignalMatrix(xs - np.outer(a, ys[0]))


def project_signal_subspace(x: SignalLike, n_components: int, lag: int = 1) -> np.ndarray:
    """Orthonormal ``(n_components, M)`` projection onto the dominant lag-correlation subspace.

    Eigenvectors of the symmetrized ``R[lag]`` with the largest eigenvalues
    are used; for ``lag != 0`` white noise does not bias the subspace.
    """
    r = estimate_lag_correlation(x, lag, symmetrize=True).matrix
    lam, V = np.linalg.eigh(r)
    idx = np.argsort(lam)[::-1][:n_components]
    Q = V[:, idx].T
    return _canonical_sign(Q.T).T


@dataclass(frozen=True)
class SequentialExtraction:
    demixing: np.ndarray  # (k, M) effective vectors acting on the original mixtures
    outputs: SignalMatrix  # (k, N)
    eigenvalues: np.ndarray


def extract_sequential(
    x: SignalLike,
    n_sources: int | None = None,
    delta0: int = 1,
    delta1: int = 2,
    mode: str = "gcca",
    deflation_lag: int | None = None,
    numerator_weights=None,
    denominator_weights=None,
    subspace_dim: int | None = None,
) -> SequentialExtraction:
    """Extract ``n_sources`` sources one at a time with deflation in between.

    After each deflation the residual has one fewer active dimension; it is
    projected onto its dominant lag-correlation subspace so the next pencil
    denominator stays positive definite. ``subspace_dim`` (number of sources
    when there are more mixtures than sources) projects the input the same way
    before the first extraction. The returned demixing rows are expressed in
    the coordinates of the original mixtures.
    """
    sig = as_signal(x)
    M = sig.channel_count
    dim = M if subspace_dim is None else int(subspace_dim)
    if not 1 <= dim <= M:
        raise ValueError(f"subspace_dim must be in [1, {M}], got {dim}")
    n_sources = dim if n_sources is None else int(n_sources)
    if not 1 <= n_sources <= dim:
        raise ValueError(f"n_sources must be in [1, {dim}], got {n_sources}")
    if deflation_lag is None:
        deflation_lag = delta0 if (mode == "gcca" and delta0 != 0) else 1
    subspace_lag = deflation_lag

    T = np.eye(M)
    cur = sig.data
    if dim < M:
        Q = project_signal_subspace(sig, dim, subspace_lag)
        T = Q @ T
        cur = Q @ cur

    rows, ys, lams = [], [], []
    for k in range(n_sources):
        if cur.shape[0] == 1:
            w = np.array([1.0])
            lam = np.nan
        else:
            res = extract_batch(cur, delta0, delta1, mode, numerator_weights, denominator_weights)
            w, lam = res.w, res.eigenvalue
        w_eff = T.T @ w
        y = w_eff @ sig.data
        rows.append(w_eff)
        ys.append(y)
        lams.append(lam)
        if k == n_sources - 1:
            break
        yk = w @ cur
        a = _deflation_gain(cur, yk, deflation_lag)
        cur_def = cur - np.outer(a, yk)
        T = T - np.outer(a, w_eff)
        Q = project_signal_subspace(cur_def, cur.shape[0] - 1, subspace_lag)
        T = Q @ T
        cur = Q @ cur_def
    return SequentialExtraction(np.array(rows), SignalMatrix(np.array(ys)), np.array(lams))
