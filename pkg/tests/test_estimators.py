import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import FunctionTransformer

from gccabss.estimators import GCCA, DirectGCCAExtractor, DualLPExtractor
from gccabss.metrics import match_source
from gccabss.pencil import extract_sequential
from gccabss.signals import REFERENCE_MIXING_MATRIX, MixtureModel, mix, random_mixing_matrix, row_normalize


@pytest.fixture(scope="module")
def noisy(sources_1e5):
    x = mix(MixtureModel(row_normalize(REFERENCE_MIXING_MATRIX), 0.09), sources_1e5, 0)
    return x.data.T


@pytest.mark.parametrize("cls", [GCCA, DirectGCCAExtractor, DualLPExtractor])
def test_params_roundtrip(cls):
    est = cls()
    params = est.get_params()
    assert clone(est).get_params() == params
    est.set_params(**params)


@pytest.mark.parametrize("cls", [GCCA, DirectGCCAExtractor, DualLPExtractor])
def test_not_fitted(cls):
    with pytest.raises(NotFittedError):
        cls().transform(np.ones((10, 3)))


def test_gcca_matches_functional(sources_1e4):
    x = mix(MixtureModel(random_mixing_matrix(3, 3, seed=1)), sources_1e4, 0)
    est = GCCA().fit(x.data.T)
    ref = extract_sequential(x)
    np.testing.assert_array_equal(est.components_, ref.demixing)
    Y = est.transform(x.data.T)
    assert Y.shape == (x.sample_count, 3)
    for y in Y.T:
        assert abs(match_source(y, sources_1e4)[1]) >= 0.99


def test_gcca_feature_check(sources_1e4):
    est = GCCA(n_components=1).fit(sources_1e4.data.T)
    with pytest.raises(ValueError):
        est.transform(np.ones((10, 2)))


def test_gcca_in_pipeline(sources_1e4):
    x = mix(MixtureModel(random_mixing_matrix(3, 3, seed=1)), sources_1e4, 0).data.T
    pipe = make_pipeline(FunctionTransformer(), GCCA(n_components=2))
    assert pipe.fit_transform(x).shape == (x.shape[0], 2)


def test_dual_estimator(noisy, sources_1e5):
    est = DualLPExtractor(random_state=3).fit(noisy)
    y = est.transform(noisy)
    assert y.shape == (noisy.shape[0], 1)
    idx, corr = match_source(y[-20_000:, 0], sources_1e5.data[:, -20_000:])
    assert idx == 0 and abs(corr) > 0.9
    assert est.errors_.shape == (noisy.shape[0], 2)


def test_direct_estimator(noisy):
    est = DirectGCCAExtractor(random_state=3).fit(noisy)
    assert abs(np.linalg.norm(est.w_) - 1) < 1e-10


def test_partial_fit_continues(noisy):
    a = DualLPExtractor(random_state=7).fit(noisy[:50_000])
    a.partial_fit(noisy[50_000:])
    b = DualLPExtractor(random_state=7).fit(noisy)
    np.testing.assert_array_equal(a.w_, b.w_)


def test_random_state_reproducible(noisy):
    a = DirectGCCAExtractor(random_state=11).fit(noisy[:5000])
    b = DirectGCCAExtractor(random_state=11).fit(noisy[:5000])
    assert a.w_.tobytes() == b.w_.tobytes()
