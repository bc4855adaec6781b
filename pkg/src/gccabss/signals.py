"""Source generation, instantaneous mixing and multichannel signal buffers.

Signals are stored channels-first: a :class:`SignalMatrix` of ``C`` channels
and ``N`` samples holds an array of shape ``(C, N)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy.signal import lfilter

from .exceptions import PreconditionError

__all__ = [
    "REFERENCE_MIXING_MATRIX",
    "DEFAULT_SOURCE_FILTERS",
    "SignalMatrix",
    "SourceFilter",
    "SourceSpec",
    "MixtureModel",
    "as_signal",
    "generate_sources",
    "theoretical_autocorrelation",
    "check_positive_lag_correlation",
    "mix",
    "row_normalize",
    "random_mixing_matrix",
    "write_matrix_csv",
    "read_matrix_csv",
]

# 3x3 mixing matrix of the reference simulation, before row normalization.
REFERENCE_MIXING_MATRIX = np.array(
    [
        [0.9207, 0.0299, 0.3891],
        [0.5165, 0.3676, 0.7733],
        [0.7822, -0.2735, -0.5598],
    ]
)


@dataclass(frozen=True)
class SignalMatrix:
    """Multichannel time series, shape ``(channel_count, sample_count)``."""

    data: np.ndarray

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim == 1:
            data = data[np.newaxis, :]
        if data.ndim != 2:
            raise ValueError(f"signal data must be 2-D, got shape {data.shape}")
        if data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"signal must have at least one channel and one sample, got {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("signal contains non-finite values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def channel_count(self) -> int:
        return self.data.shape[0]

    @property
    def sample_count(self) -> int:
        return self.data.shape[1]

    def __len__(self):
        return self.sample_count

    def channel(self, index: int) -> "SignalMatrix":
        return SignalMatrix(self.data[index : index + 1])

    def to_csv(self, path) -> None:
        write_matrix_csv(path, self.data)

    @classmethod
    def from_csv(cls, path) -> "SignalMatrix":
        return cls(read_matrix_csv(path))


SignalLike = Union[SignalMatrix, np.ndarray, Sequence]


def as_signal(x: SignalLike) -> SignalMatrix:
    if isinstance(x, SignalMatrix):
        return x
    return SignalMatrix(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SourceFilter:
    """Filter shaping white Gaussian noise into one source.

    ``kind="ar"`` is the all-pole recursion
    ``s[n] = u[n] + sum_k coefficients[k-1] * s[n-k]``;
    ``kind="ma"`` is the all-zero filter ``s[n] = sum_k coefficients[k] * u[n-k]``.
    """

    kind: str
    coefficients: tuple

    def __post_init__(self):
        if self.kind not in ("ar", "ma"):
            raise ValueError(f"filter kind must be 'ar' or 'ma', got {self.kind!r}")
        coeffs = tuple(float(c) for c in self.coefficients)
        if not coeffs or not any(c != 0.0 for c in coeffs):
            raise ValueError("a source filter needs at least one nonzero coefficient")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def order(self) -> int:
        if self.kind == "ar":
            return len(self.coefficients)
        return len(self.coefficients) - 1

    def transfer(self):
        """Return ``(numerator, denominator)`` for :func:`scipy.signal.lfilter`."""
        c = np.asarray(self.coefficients)
        if self.kind == "ar":
            return np.array([1.0]), np.r_[1.0, -c]
        return c, np.array([1.0])

    def poles(self) -> np.ndarray:
        if self.kind == "ma":
            return np.zeros(0)
        return np.roots(np.r_[1.0, -np.asarray(self.coefficients)])

    def check_stable(self) -> None:
        poles = self.poles()
        if poles.size and np.max(np.abs(poles)) >= 1.0:
            raise PreconditionError(
                f"unstable AR source filter {self.coefficients}: "
                f"pole magnitude {np.max(np.abs(poles)):.6g} >= 1"
            )

    @classmethod
    def from_dict(cls, d) -> "SourceFilter":
        return cls(kind=d.get("kind", "ar"), coefficients=tuple(d["coefficients"]))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "coefficients": list(self.coefficients)}


# Three preset sources with distinct, positive lag-1 autocorrelations:
# rho[1] = 0.9, 0.5, 0.6 and rho[2]/rho[1] = 0.9, 0.5, 0.067.
DEFAULT_SOURCE_FILTERS = (
    SourceFilter("ar", (0.9,)),
    SourceFilter("ar", (0.5,)),
    SourceFilter("ar", (0.9, -0.5)),
)


@dataclass(frozen=True)
class SourceSpec:
    filters: tuple = DEFAULT_SOURCE_FILTERS
    seed: int = 0
    length: int = 10_000
    normalize_power: bool = True

    def __post_init__(self):
        filters = tuple(f if isinstance(f, SourceFilter) else SourceFilter.from_dict(f) for f in self.filters)
        if not filters:
            raise ValueError("at least one source filter is required")
        object.__setattr__(self, "filters", filters)

    @property
    def source_count(self) -> int:
        return len(self.filters)

    @property
    def max_order(self) -> int:
        return max(f.order for f in self.filters)


def generate_sources(spec: SourceSpec) -> SignalMatrix:
    """Filter seeded white Gaussian noise through each source filter.

    The first ``10 * order`` samples of every filtered sequence are dropped
    so the output is close to stationary. With ``normalize_power`` each row is
    scaled to unit sample variance.
    """
    order = spec.max_order
    if spec.length < max(1, 10 * order):
        raise ValueError(f"length {spec.length} is shorter than 10 x max filter order ({order})")
    for f in spec.filters:
        f.check_stable()

    warmup = 10 * order
    rng = np.random.default_rng(spec.seed)
    drive = rng.standard_normal((spec.source_count, spec.length + warmup))
    out = np.empty((spec.source_count, spec.length))
    for i, f in enumerate(spec.filters):
        num, den = f.transfer()
        out[i] = lfilter(num, den, drive[i])[warmup:]
    if spec.normalize_power:
        std = out.std(axis=1, keepdims=True)
        if np.any(std == 0):
            raise PreconditionError("generated source has zero variance")
        out /= std
    return SignalMatrix(out)


def theoretical_autocorrelation(source_filter: SourceFilter, max_lag: int) -> np.ndarray:
    """Normalized autocorrelation ``rho[0..max_lag]`` of a filtered white process."""
    source_filter.check_stable()
    num, den = source_filter.transfer()
    if source_filter.kind == "ma":
        h = num
    else:
        radius = float(np.max(np.abs(source_filter.poles())))
        length = max_lag + 64
        if radius > 0:
            length += int(np.ceil(np.log(1e-18) / np.log(radius)))
        impulse = np.zeros(length)
        impulse[0] = 1.0
        h = lfilter(num, den, impulse)
    r = np.array([np.dot(h[: len(h) - k], h[k:]) if k < len(h) else 0.0 for k in range(max_lag + 1)])
    return r / r[0]


def check_positive_lag_correlation(sources: SignalLike, lag: int = 1, tol: float = 0.0) -> np.ndarray:
    """Return each source's sample correlation at ``lag`` normalized by its power.

    Raises :class:`PreconditionError` if any value is ``<= tol``.
    """
    s = as_signal(sources).data
    n = s.shape[1]
    if not 0 < lag < n:
        raise ValueError(f"lag must be in [1, {n - 1}], got {lag}")
    lagged = np.sum(s[:, lag:] * s[:, : n - lag], axis=1) / (n - lag)
    power = np.mean(s * s, axis=1)
    rho = lagged / power
    bad = np.flatnonzero(rho <= tol)
    if bad.size:
        raise PreconditionError(
            f"sources {bad.tolist()} have non-positive lag-{lag} correlation {rho[bad].round(4).tolist()}"
        )
    return rho


def row_normalize(A) -> np.ndarray:
    """Scale every row of ``A`` to unit Euclidean norm."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    norms = np.linalg.norm(A, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("cannot row-normalize a matrix with a zero row")
    return A / norms


@dataclass(frozen=True)
class MixtureModel:
    """Ground truth of ``x[n] = A s[n] + v[n]`` with white noise of variance ``noise_variance``."""

    A: np.ndarray
    noise_variance: float = 0.0
    row_normalized: bool = False

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if self.row_normalized:
            A = row_normalize(A)
        m, l = A.shape
        if l < 2 or m < l:
            raise ValueError(f"mixing matrix must be M x L with M >= L >= 2, got {A.shape}")
        if np.linalg.matrix_rank(A) < l:
            raise PreconditionError("mixing matrix does not have full column rank")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be non-negative")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @property
    def mixture_count(self) -> int:
        return self.A.shape[0]

    @property
    def source_count(self) -> int:
        return self.A.shape[1]

    @classmethod
    def reference(cls, noise_variance: float = 0.09) -> "MixtureModel":
        return cls(REFERENCE_MIXING_MATRIX, noise_variance=noise_variance, row_normalized=True)


def mix(model: MixtureModel, sources: SignalLike, noise_seed: int | None = 0) -> SignalMatrix:
    """Return ``A @ s + v`` with i.i.d. Gaussian ``v`` of variance ``model.noise_variance``."""
    s = as_signal(sources)
    if s.channel_count != model.source_count:
        raise ValueError(
            f"mixing matrix expects {model.source_count} sources, got {s.channel_count} channels"
        )
    x = model.A @ s.data
    if model.noise_variance > 0:
        rng = np.random.default_rng(noise_seed)
        x = x + np.sqrt(model.noise_variance) * rng.standard_normal(x.shape)
    return SignalMatrix(x)


def random_mixing_matrix(
    n_mixtures: int, n_sources: int, seed=None, max_condition: float = 10.0, row_normalized: bool = True
) -> np.ndarray:
    """Draw a Gaussian mixing matrix, redrawing until its condition number is bounded."""
    rng = np.random.default_rng(seed)
    for _ in range(10_000):
        A = rng.standard_normal((n_mixtures, n_sources))
        if row_normalized:
            A = row_normalize(A)
        if np.linalg.cond(A) <= max_condition:
            return A
    raise RuntimeError(f"no {n_mixtures}x{n_sources} matrix with condition <= {max_condition} found")


def write_matrix_csv(path, matrix) -> None:
    """Write a 2-D array as CSV with a ``# channels=C samples=N`` header line."""
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [f"# channels={m.shape[0]} samples={m.shape[1]}"]
    lines += [",".join(format(v, ".17g") for v in row) for row in m]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    path = Path(path)
    with path.open() as fh:
        first = fh.readline().strip()
    m = np.atleast_2d(np.loadtxt(path, delimiter=",", comments="#", ndmin=2))
    if first.startswith("#"):
        fields = dict(tok.split("=", 1) for tok in first.lstrip("#").split() if "=" in tok)
        if "channels" in fields and "samples" in fields:
            expected = (int(fields["channels"]), int(fields["samples"]))
            if m.shape != expected:
                raise ValueError(f"{path}: header declares shape {expected}, data has {m.shape}")
    return m
