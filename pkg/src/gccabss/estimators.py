"""scikit-learn compatible wrappers.

These follow the estimator convention ``X.shape == (n_samples, n_channels)``;
the functional API elsewhere in the package is channels-first.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted

from .adaptive_direct import init_direct, run_direct
from .dual_lp import init_dual, run_dual
from .pencil import extract_sequential
from .stats import REFERENCE_PREDICTOR_B, PredictorCoeffs

__all__ = ["GCCA", "DirectGCCAExtractor", "DualLPExtractor"]


def _check_X(est, X, reset):
    X = check_array(X, dtype=np.float64, ensure_min_samples=3)
    if reset:
        est.n_features_in_ = X.shape[1]
    elif X.shape[1] != est.n_features_in_:
        raise ValueError(f"X has {X.shape[1]} features, but {type(est).__name__} was fitted with {est.n_features_in_}")
    return X


class GCCA(TransformerMixin, BaseEstimator):
    """Batch (generalized) CCA source extraction with deflation.

    Parameters
    ----------
    n_components : int or None
        Number of sources to extract; ``None`` extracts ``subspace_dim`` (or
        one per channel).
    delta0, delta1 : int
        Denominator and numerator lags. ``mode="cca"`` forces ``delta0 = 0``.
    mode : {"gcca", "cca"}
    numerator_weights, denominator_weights : dict or None
        Optional ``{lag: weight}`` combinations replacing single lags.
    deflation_lag : int or None
        Lag of the regression used to deflate; defaults to ``delta0`` (or 1).
    subspace_dim : int or None
        Number of sources when there are more channels than sources; the
        input is first projected onto that many dimensions.

    Attributes
    ----------
    components_ : ndarray of shape (n_components, n_features)
        Demixing vectors acting on the original channels.
    eigenvalues_ : ndarray of shape (n_components,)
        Top pencil eigenvalue at each extraction stage.
    """

    def __init__(
        self,
        n_components=None,
        delta0=1,
        delta1=2,
        mode="gcca",
        numerator_weights=None,
        denominator_weights=None,
        deflation_lag=None,
        subspace_dim=None,
    ):
        self.n_components = n_components
        self.delta0 = delta0
        self.delta1 = delta1
        self.mode = mode
        self.numerator_weights = numerator_weights
        self.denominator_weights = denominator_weights
        self.deflation_lag = deflation_lag
        self.subspace_dim = subspace_dim

    def fit(self, X, y=None):
        X = _check_X(self, X, reset=True)
        res = extract_sequential(
            X.T,
            n_sources=self.n_components,
            delta0=self.delta0,
            delta1=self.delta1,
            mode=self.mode,
            deflation_lag=self.deflation_lag,
            numerator_weights=self.numerator_weights,
            denominator_weights=self.denominator_weights,
            subspace_dim=self.subspace_dim,
        )
        self.components_ = res.demixing
        self.eigenvalues_ = res.eigenvalues
        return self

    def transform(self, X):
        check_is_fitted(self, "components_")
        X = _check_X(self, X, reset=False)
        return X @ self.components_.T


class _OnlineExtractor(TransformerMixin, BaseEstimator):
    def _init_state(self, n_features):  # pragma: no cover - abstract
        raise NotImplementedError

    def _run(self, X):  # pragma: no cover - abstract
        raise NotImplementedError

    def fit(self, X, y=None):
        X = _check_X(self, X, reset=True)
        self.state_ = self._init_state(X.shape[1])
        self._run(X)
        return self

    def partial_fit(self, X, y=None):
        """Continue adaptation from the current state (initializing on first call)."""
        first = not hasattr(self, "state_")
        X = _check_X(self, X, reset=first)
        if first:
            self.state_ = self._init_state(X.shape[1])
        self._run(X)
        return self

    def transform(self, X):
        check_is_fitted(self, "w_")
        X = _check_X(self, X, reset=False)
        return (X @ self.w_)[:, np.newaxis]


class DirectGCCAExtractor(_OnlineExtractor):
    """Online extraction maximizing the weighted-lag correlation ratio.

    ``b`` weights the output at lags ``2 .. len(b)+1``; the normalizing lag
    is 1. ``w`` is kept at unit norm.

    Attributes
    ----------
    w_ : ndarray of shape (n_features,)
    output_ : ndarray, extractor output of the last ``fit``/``partial_fit`` call
    w_history_ : ndarray of shape (n_samples, n_features)
    """

    def __init__(self, b=(1.0,), mu=0.0015, beta=0.975, warmup=100, random_state=None):
        self.b = b
        self.mu = mu
        self.beta = beta
        self.warmup = warmup
        self.random_state = random_state

    def _init_state(self, n_features):
        rs = check_random_state(self.random_state)
        return init_direct(n_features, self.b, self.mu, self.beta, seed=rs.randint(2**31 - 1), warmup=self.warmup)

    def _run(self, X):
        run = run_direct(self.state_, X.T)
        self.w_ = self.state_.w.copy()
        self.output_ = run.y
        self.w_history_ = run.w_history
        self.sigma_y_ = run.sigma_y


class DualLPExtractor(_OnlineExtractor):
    """Online extraction with the dual linear predictor structure.

    Minimizes the ratio of noise-free prediction-error surrogates and so
    extracts the source with the smallest normalized autocorrelation.

    Attributes
    ----------
    w_ : ndarray of shape (n_features,)
    output_, errors_ : ndarrays with ``y`` and the ``(e, f)`` prediction errors
    w_history_ : ndarray of shape (n_samples, n_features)
    """

    def __init__(
        self,
        b=REFERENCE_PREDICTOR_B,
        d=(1.0,),
        mu=0.0015,
        beta_e=0.975,
        beta_y=0.975,
        beta_f=0.975,
        warmup=100,
        normalize=False,
        random_state=None,
    ):
        self.b = b
        self.d = d
        self.mu = mu
        self.beta_e = beta_e
        self.beta_y = beta_y
        self.beta_f = beta_f
        self.warmup = warmup
        self.normalize = normalize
        self.random_state = random_state

    def _init_state(self, n_features):
        rs = check_random_state(self.random_state)
        coeffs = PredictorCoeffs(b=tuple(self.b), d=tuple(self.d))
        return init_dual(
            n_features, coeffs, mu=self.mu, betas=(self.beta_e, self.beta_y, self.beta_f),
            seed=rs.randint(2**31 - 1), warmup=self.warmup, normalize=self.normalize,
        )

    def _run(self, X):
        run = run_dual(self.state_, X.T)
        self.w_ = self.state_.w.copy()
        self.output_ = run.y
        self.errors_ = np.column_stack([run.e, run.f])
        self.w_history_ = run.w_history
        self.sigmas_ = run.sigmas
