import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from opclosure.measures import (GaussianMeasure, MeasureError, condition,
                                project_matrix, projection_pair)


def random_spd_measure(rng, n, k):
    M = rng.standard_normal((n, n))
    return GaussianMeasure(A=M.T @ M + np.eye(n), m=np.zeros(n), k=k)


class TestCondition:
    def test_identity_covariance_decouples(self):
        rng = np.random.default_rng(0)
        for n, k in ((2, 1), (4, 2), (5, 3)):
            m = GaussianMeasure(A=np.eye(n), m=np.zeros(n), k=k)
            x_C = rng.standard_normal(k)
            out = condition(m, x_C)
            assert np.array_equal(out[:k], x_C)
            assert np.all(out[k:] == 0.0)

    def test_correlated_pair(self):
        # conditioned measure for the unresolved variable is centered at beta*x_C
        m = GaussianMeasure(A=np.array([[1.0, 0.5], [0.5, 1.0]]), m=np.zeros(2), k=1)
        out = condition(m, np.array([1.0]))
        assert out[1] == pytest.approx(0.5, abs=1e-14)

    def test_offcenter_mean_frozen_value(self):
        m = GaussianMeasure(A=np.array([[2.0, 1.0], [1.0, 2.0]]),
                            m=np.array([1.0, 1.0]), k=1)
        out = condition(m, np.array([3.0]))
        assert out[1] == pytest.approx(2.0, abs=1e-12)

    def test_offcenter_mean_against_quadratic_minimizer(self):
        # the conditional mean minimizes the quadratic form over the unresolved slot
        A = np.array([[2.0, 1.0], [1.0, 2.0]])
        mean = np.array([1.0, 1.0])
        Ainv = np.linalg.inv(A)
        x_C = 3.0

        def quad(x_F):
            d = np.array([x_C, x_F]) - mean
            return d @ Ainv @ d

        res = minimize_scalar(quad, bounds=(-10, 10), method="bounded",
                              options={"xatol": 1e-12})
        m = GaussianMeasure(A=A, m=mean, k=1)
        assert condition(m, np.array([x_C]))[1] == pytest.approx(res.x, abs=1e-8)

    def test_resolved_part_verbatim(self):
        rng = np.random.default_rng(7)
        m = random_spd_measure(rng, 5, 2)
        x_C = rng.standard_normal(2)
        assert np.array_equal(condition(m, x_C)[:2], x_C)

    def test_conditioning_is_idempotent(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            n = int(rng.integers(2, 7))
            k = int(rng.integers(1, n))
            m = random_spd_measure(rng, n, k)
            x_C = rng.standard_normal(k)
            once = condition(m, x_C)
            twice = condition(m, once[:k])
            assert np.abs(twice - once).max() < 1e-12 * max(1, np.abs(once).max())

    def test_linear_for_zero_mean(self):
        rng = np.random.default_rng(13)
        m = random_spd_measure(rng, 4, 2)
        x, y = rng.standard_normal(2), rng.standard_normal(2)
        a, b = 0.7, -1.3
        lhs = condition(m, a * x + b * y)
        rhs = a * condition(m, x) + b * condition(m, y)
        assert np.abs(lhs - rhs).max() < 1e-12

    def test_monte_carlo_conditional_mean(self):
        rng = np.random.default_rng(42)
        M = rng.standard_normal((3, 3))
        A = M.T @ M + np.eye(3)
        measure = GaussianMeasure(A=A, m=np.zeros(3), k=1)
        target = 0.8
        samples = rng.multivariate_normal(np.zeros(3), A, size=400_000)
        sel = samples[np.abs(samples[:, 0] - target) < 0.05]
        assert len(sel) > 1000
        empirical = sel[:, 1:].mean(axis=0)
        stderr = sel[:, 1:].std(axis=0) / np.sqrt(len(sel))
        predicted = condition(measure, np.array([sel[:, 0].mean()]))[1:]
        assert np.all(np.abs(empirical - predicted) < 3.0 * stderr)


class TestProjectionPair:
    def test_diagonal_measure(self):
        m = GaussianMeasure(A=np.diag([1.0, 2.0, 3.0]), m=np.zeros(3), k=1)
        pair = projection_pair(m)
        expected = np.zeros((3, 3))
        expected[0, 0] = 1.0
        assert np.array_equal(pair.E, expected)

    def test_two_by_two_coupling(self):
        beta, gamma = 0.4, 1.5
        m = GaussianMeasure(A=np.array([[1.0, beta], [beta, gamma]]),
                            m=np.zeros(2), k=1)
        pair = projection_pair(m)
        assert np.allclose(pair.E, [[1.0, 0.0], [beta, 0.0]], atol=1e-14)
        assert np.allclose(pair.F, [[0.0, 0.0], [-beta, 1.0]], atol=1e-14)

    def test_random_spd_identities(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            m = random_spd_measure(rng, 4, 2)
            pair = projection_pair(m)
            E, F = pair.E, pair.F
            scale = max(1.0, np.abs(E).max())
            assert np.abs(E @ E - E).max() < 1e-12 * scale
            assert np.abs(F @ F - F).max() < 1e-12 * scale
            assert np.abs(E @ F).max() < 1e-12 * scale
            assert np.abs(F @ E).max() < 1e-12 * scale
            assert np.abs(E + F - np.eye(4)).max() < 1e-12 * scale


class TestProjectMatrix:
    def test_diagonal_measure_zeroes_right_block(self):
        rng = np.random.default_rng(5)
        B = rng.standard_normal((4, 4))
        m = GaussianMeasure(A=np.diag([1.0, 1.0, 2.0, 2.0]), m=np.zeros(4), k=2)
        out = project_matrix(B, m)
        assert np.array_equal(out[:, :2], B[:, :2])
        assert np.all(out[:, 2:] == 0.0)

    def test_identity_matrix_hand_blocks(self):
        m = GaussianMeasure(A=np.array([[2.0, 1.0], [1.0, 2.0]]), m=np.zeros(2), k=1)
        out = project_matrix(np.eye(2), m)
        assert np.allclose(out, [[1.0, 0.0], [0.5, 0.0]], atol=1e-14)

    def test_complex_input_supported(self):
        xi = 2.0
        B = np.array([[-1.0, 1j * xi], [1j * xi, -1.0]])
        m = GaussianMeasure(A=np.array([[1.0, 0.5], [0.5, 1.0]]), m=np.zeros(2), k=1)
        out = project_matrix(B, m)
        assert out.dtype.kind == "c"
        assert out[0, 0] == pytest.approx(-1.0 + 0.5j * xi)
        assert out[1, 0] == pytest.approx(1j * xi - 0.5)
        assert np.all(out[:, 1] == 0.0)


class TestValidation:
    def test_rejects_asymmetric(self):
        with pytest.raises(MeasureError, match="symmetric"):
            GaussianMeasure(A=np.array([[1.0, 0.2], [0.0, 1.0]]), m=np.zeros(2), k=1)

    def test_rejects_indefinite(self):
        with pytest.raises(MeasureError, match="positive definite"):
            GaussianMeasure(A=np.array([[1.0, 2.0], [2.0, 1.0]]), m=np.zeros(2), k=1)

    def test_rejects_bad_split(self):
        for k in (0, 2, 5):
            with pytest.raises(MeasureError, match="split"):
                GaussianMeasure(A=np.eye(2), m=np.zeros(2), k=k)

    def test_rejects_wrong_conditioning_length(self):
        m = GaussianMeasure(A=np.eye(3), m=np.zeros(3), k=1)
        with pytest.raises(MeasureError):
            condition(m, np.array([1.0, 2.0]))
