import time
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_spd
from gccabss.exceptions import PreconditionError
from gccabss.metrics import global_vector, match_source, performance_index
from gccabss.pencil import (
    deflate,
    extract_batch,
    extract_sequential,
    jacobi_eigh,
    pencil_cost,
    solve_pencil,
)
from gccabss.signals import MixtureModel, SourceFilter, SourceSpec, generate_sources, mix, random_mixing_matrix
from gccabss.stats import estimate_lag_correlation
from oracles import charpoly_eigenvalues


def two_sources(seed=0, n=10_000):
    return generate_sources(SourceSpec((SourceFilter("ar", (0.9,)), SourceFilter("ar", (0.3,))), seed=seed, length=n))


class TestJacobi:
    @given(st.integers(1, 8), st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_reconstruction(self, n, seed):
        a = np.random.default_rng(seed).standard_normal((n, n))
        c = a + a.T
        lam, V = jacobi_eigh(c)
        np.testing.assert_allclose(V.T @ V, np.eye(n), atol=1e-12)
        np.testing.assert_allclose(V @ np.diag(lam) @ V.T, c, atol=1e-11 * max(1.0, np.abs(c).max()))
        np.testing.assert_allclose(np.sort(lam), np.linalg.eigvalsh(c), atol=1e-11 * max(1.0, np.abs(c).max()))


class TestSolvePencil:
    def test_diagonal(self):
        sol = solve_pencil(np.diag([2.0, 1.0]), np.eye(2))
        np.testing.assert_allclose(sol.eigenvalues, [2.0, 1.0], rtol=1e-15)
        np.testing.assert_allclose(np.abs(sol.eigenvectors), np.eye(2), atol=1e-15)

    def test_identity_pencil(self, rng):
        D = random_spd(rng, 4)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            sol = solve_pencil(D, D)
        np.testing.assert_allclose(sol.eigenvalues, 1.0, rtol=1e-12)

    def test_repeated_eigenvalue_warns(self):
        with pytest.warns(RuntimeWarning, match="repeated"):
            solve_pencil(np.eye(3), np.eye(3))

    def test_random_3x3_against_charpoly(self, rng):
        for _ in range(20):
            A = rng.standard_normal((3, 3))
            N = A + A.T
            D = random_spd(rng, 3)
            sol = solve_pencil(N, D)
            oracle = charpoly_eigenvalues(N, D)
            np.testing.assert_allclose(sol.eigenvalues, oracle, rtol=1e-9)

    def test_postconditions(self, rng):
        for n in range(2, 7):
            A = rng.standard_normal((n, n))
            N = A + A.T
            D = random_spd(rng, n)
            sol = solve_pencil(N, D)
            W, lam = sol.eigenvectors, sol.eigenvalues
            assert np.all(np.diff(lam) <= 0)
            np.testing.assert_allclose(np.linalg.norm(W, axis=0), 1.0, atol=1e-12)
            for j in range(n):
                r = N @ W[:, j] - lam[j] * D @ W[:, j]
                assert np.linalg.norm(r) <= 1e-8 * np.linalg.norm(N)
                first = W[np.flatnonzero(W[:, j])[0], j]
                assert first > 0

    def test_not_pd(self):
        with pytest.raises(PreconditionError, match="positive definite"):
            solve_pencil(np.eye(2), np.diag([1.0, -1.0]))
        with pytest.raises(PreconditionError):
            solve_pencil(np.eye(2), np.diag([1.0, 1e-12]))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            solve_pencil(np.eye(2), np.eye(3))

    def test_asymmetric_array_rejected(self):
        with pytest.raises(ValueError):
            solve_pencil(np.array([[1.0, 2.0], [0.0, 1.0]]), np.eye(2))

    def test_unsymmetrized_lagcorrelation_rejected(self, rng):
        x = rng.standard_normal((2, 500))
        with pytest.raises(ValueError):
            solve_pencil(estimate_lag_correlation(x, 2), estimate_lag_correlation(x, 0, True))

    def test_lag_metadata(self, rng):
        x = rng.standard_normal((2, 500))
        sol = solve_pencil(estimate_lag_correlation(x, 2, True), estimate_lag_correlation(x, 0, True))
        assert sol.numerator_lags == (2,) and sol.denominator_lags == (0,)

    def test_deterministic_output(self, rng):
        N = rng.standard_normal((4, 4))
        N = N + N.T
        D = random_spd(rng, 4)
        a, b = solve_pencil(N, D), solve_pencil(N.copy(), D.copy())
        assert a.eigenvectors.tobytes() == b.eigenvectors.tobytes()


class TestCost:
    @given(st.integers(0, 2**31), st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-3))
    @settings(max_examples=50, deadline=None)
    def test_scale_invariance(self, seed, c):
        r = np.random.default_rng(seed)
        N = r.standard_normal((3, 3))
        N = N + N.T
        D = random_spd(r, 3)
        w = r.standard_normal(3)
        assert pencil_cost(c * w, N, D) == pytest.approx(pencil_cost(w, N, D), rel=1e-12)

    def test_rayleigh_optimality(self, rng, sources_1e4):
        A = random_mixing_matrix(3, 3, seed=2)
        x = mix(MixtureModel(A, 0.09), sources_1e4, 1)
        num = estimate_lag_correlation(x, 2, True)
        den = estimate_lag_correlation(x, 1, True)
        lam, w = solve_pencil(num, den).top
        assert pencil_cost(w, num, den) == pytest.approx(lam, rel=1e-10)
        probes = rng.standard_normal((1000, 3))
        probes /= np.linalg.norm(probes, axis=1, keepdims=True)
        costs = [pencil_cost(v, num, den) for v in probes]
        assert np.max(costs) <= lam * (1 + 1e-12)


class TestExtractBatch:
    def test_two_source_noise_free(self):
        s = two_sources()
        A = np.array([[1.0, 0.6], [0.4, 1.0]])
        x = mix(MixtureModel(A), s, 0)
        w, y = extract_batch(x, 1, 2)
        idx, corr = match_source(y, s)
        assert abs(corr) >= 0.99
        # largest rho[2]/rho[1]: the 0.9 pole source
        assert idx == 0

    def test_rank_one(self):
        s = two_sources().data[0]
        x = np.vstack([s, 2 * s, -s])
        # every lagged correlation matrix is singular, so the full pencil is rejected
        with pytest.raises(PreconditionError):
            extract_batch(x, 1, 2)
        res = extract_sequential(x, n_sources=1, subspace_dim=1)
        _, corr = match_source(res.outputs, s[None, :])
        assert abs(corr) >= 0.999

    def test_cca_mode_uses_lag0(self):
        x = mix(MixtureModel(np.eye(2)), two_sources(), 0)
        res = extract_batch(x, delta1=2, mode="cca")
        assert res.solution.denominator_lags == (0,)

    def test_weighted_lags(self):
        s = two_sources()
        x = mix(MixtureModel(np.array([[1.0, 0.6], [0.4, 1.0]])), s, 0)
        res = extract_batch(x, numerator_weights={2: 1.0, 3: 0.5}, denominator_weights={1: 1.0})
        assert res.solution.numerator_lags == (2, 3)
        assert abs(match_source(res.y, s)[1]) >= 0.99

    @pytest.mark.parametrize(
        "kw", [dict(delta0=0, delta1=2), dict(delta0=2, delta1=2), dict(mode="ica"), dict(mode="cca", delta1=0)]
    )
    def test_invalid_lags(self, kw):
        x = mix(MixtureModel(np.eye(2)), two_sources(n=500), 0)
        with pytest.raises(ValueError):
            extract_batch(x, **kw)

    def test_gcca_beats_cca_under_noise(self, sources_1e4):
        A = random_mixing_matrix(3, 3, seed=8)
        gains = []
        for seed in range(15):
            x = mix(MixtureModel(A, 0.09), sources_1e4, seed)
            pi_g = performance_index(global_vector(A, extract_batch(x, 1, 2, "gcca").w))
            pi_c = performance_index(global_vector(A, extract_batch(x, 0, 2, "cca").w))
            gains.append(pi_c - pi_g)
        assert np.median(gains) > 0


class TestDeflate:
    def test_exact_rank_one(self):
        y = two_sources().data[:1]
        x = np.array([[2.0], [-0.5]]) * y
        res = deflate(x, y, 1)
        assert np.linalg.norm(res.data) <= 1e-8 * np.linalg.norm(x)

    def test_zero_y(self):
        with pytest.raises(PreconditionError):
            deflate(np.ones((2, 100)), np.zeros((1, 100)), 1)

    def test_bad_lag(self):
        y = two_sources(n=500).data[:1]
        with pytest.raises(ValueError):
            deflate(np.vstack([y, y]), y, 0)

    def test_known_mixing(self):
        s = two_sources()
        A = np.array([[1.0, 0.5], [0.3, 1.0]])
        x = mix(MixtureModel(A), s, 0)
        w = np.linalg.inv(A)[0]
        y = w @ x.data
        res = deflate(x, y[None, :], 1).data
        for ch in res:
            assert abs(np.corrcoef(ch, s.data[1])[0, 1]) >= 0.99
            assert abs(np.corrcoef(ch, s.data[0])[0, 1]) <= 0.05


class TestSequential:
    def test_full_separation(self, sources_1e4):
        A = random_mixing_matrix(3, 3, seed=4)
        x = mix(MixtureModel(A), sources_1e4, 0)
        res = extract_sequential(x)
        matched = []
        for y in res.outputs.data:
            idx, corr = match_source(y, sources_1e4)
            assert abs(corr) >= 0.99
            matched.append(idx)
        assert sorted(matched) == [0, 1, 2]
        # demixing rows reproduce the outputs from the original mixtures
        np.testing.assert_allclose(res.demixing @ x.data, res.outputs.data, atol=1e-10)

    def test_single_source_matches_extract_batch(self, sources_1e4):
        A = random_mixing_matrix(3, 3, seed=4)
        x = mix(MixtureModel(A, 0.09), sources_1e4, 0)
        seq = extract_sequential(x, n_sources=1)
        one = extract_batch(x, 1, 2)
        np.testing.assert_allclose(seq.demixing[0], one.w, atol=1e-12)

    def test_overdetermined_subspace(self, sources_1e4):
        A = random_mixing_matrix(5, 3, seed=6)
        x = mix(MixtureModel(A, 0.01), sources_1e4, 0)
        res = extract_sequential(x, subspace_dim=3)
        assert res.demixing.shape == (3, 5)
        assert sorted(match_source(y, sources_1e4)[0] for y in res.outputs.data) == [0, 1, 2]

    def test_n_sources_bounds(self, sources_1e4):
        with pytest.raises(ValueError):
            extract_sequential(sources_1e4, n_sources=4)

    def test_runtime(self, sources_1e4):
        x = mix(MixtureModel(random_mixing_matrix(3, 3, seed=4)), sources_1e4, 0)
        t = time.perf_counter()
        extract_sequential(x)
        assert time.perf_counter() - t < 5.0
