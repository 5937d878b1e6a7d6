import numpy as np
import pytest
from scipy.linalg import expm

from opclosure.measures import GaussianMeasure, projection_pair
from opclosure.prediction import (InstabilityError, LinearSystem, foop_generator,
                                  mean_solution, memory_kernel,
                                  orthogonal_propagate, propagate,
                                  reconstruct_unresolved, solve_full_op,
                                  soop_generator)
from opclosure.scenarios import dyson_residual
from opclosure.twocomponent import mean_mode, mode_generator, mode_measure


def random_measure(rng, n, k):
    M = rng.standard_normal((n, n))
    return GaussianMeasure(A=M.T @ M + np.eye(n), m=np.zeros(n), k=k)


def random_system(rng, n, norm=0.8):
    R = rng.standard_normal((n, n))
    R *= norm / np.linalg.norm(R, 2)
    return LinearSystem(R=R, u0=rng.standard_normal(n))


class TestPropagate:
    def test_zero_generator(self):
        sys_ = LinearSystem(R=np.zeros((3, 3)), u0=np.array([1.0, -2.0, 0.5]))
        assert np.array_equal(propagate(sys_, 2.0), sys_.u0)

    def test_uniform_decay(self):
        sys_ = LinearSystem(R=-np.eye(2), u0=np.array([3.0, 1.0]))
        assert np.allclose(propagate(sys_, 1.0), sys_.u0 * np.exp(-1.0), rtol=1e-12)

    def test_quarter_rotation(self):
        sys_ = LinearSystem(R=np.array([[0.0, 1.0], [-1.0, 0.0]]),
                            u0=np.array([1.0, 0.0]))
        out = propagate(sys_, np.pi / 2)
        assert np.abs(out - np.array([0.0, -1.0])).max() < 1e-9


class TestMeanSolution:
    def test_diagonal_measure_zeroes_unresolved_data(self):
        rng = np.random.default_rng(1)
        sys_ = random_system(rng, 4)
        measure = GaussianMeasure(A=np.diag([1.0, 2.0, 1.5, 0.5]),
                                  m=np.zeros(4), k=2)
        chopped = LinearSystem(R=sys_.R,
                               u0=np.concatenate([sys_.u0[:2], np.zeros(2)]))
        assert np.allclose(mean_solution(sys_, measure, 0.7),
                           propagate(chopped, 0.7), atol=1e-13)

    def test_model_mode_closed_form(self):
        beta, xi, t = 0.5, 2 * np.pi, 0.6
        sys_ = LinearSystem(R=mode_generator(xi), u0=np.array([1.0 + 0j, 0.0]))
        out = mean_solution(sys_, mode_measure(beta), t)
        assert abs(out[0] - mean_mode(beta, xi, t)) < 1e-12

    def test_volterra_solver_as_oracle(self):
        rng = np.random.default_rng(2)
        sys_ = random_system(rng, 3)
        measure = random_measure(rng, 3, 1)
        t_end = 0.5
        times, traj = solve_full_op(sys_, measure, t_end, 2.5e-4)
        exact = mean_solution(sys_, measure, t_end)
        assert np.abs(traj[-1] - exact[:1]).max() < 1e-6


class TestOrthogonalPropagate:
    def test_time_zero_is_identity(self):
        rng = np.random.default_rng(3)
        sys_ = random_system(rng, 3)
        measure = random_measure(rng, 3, 2)
        assert np.array_equal(orthogonal_propagate(sys_, measure, 0.0), np.eye(3))

    def test_vanishing_orthogonal_generator(self):
        # diagonal measure and a generator supported on the resolved block: RF = 0
        R = np.zeros((3, 3))
        R[:1, :1] = -2.0
        sys_ = LinearSystem(R=R, u0=np.ones(3))
        measure = GaussianMeasure(A=np.eye(3), m=np.zeros(3), k=1)
        for t in (0.3, 1.7):
            assert np.allclose(orthogonal_propagate(sys_, measure, t),
                               np.eye(3), atol=1e-14)

    def test_model_mode_quadrature_form(self):
        # e^{tRF} = I + (int_0^t e^{-s} e^{-i beta xi s} ds) RF on a Fourier mode
        beta, xi, t = 0.3, 3.0, 0.8
        sys_ = LinearSystem(R=mode_generator(xi), u0=np.array([1.0 + 0j, 0.0]))
        measure = mode_measure(beta)
        RF = sys_.R @ projection_pair(measure).F
        s = np.linspace(0.0, t, 4001)
        phi = np.trapezoid(np.exp(-s) * np.exp(-1j * beta * xi * s), s)
        expected = np.eye(2) + phi * RF
        out = orthogonal_propagate(sys_, measure, t)
        assert np.abs(out - expected).max() < 1e-7


class TestMemoryKernel:
    def test_time_zero_value(self):
        rng = np.random.default_rng(4)
        sys_ = random_system(rng, 4)
        measure = random_measure(rng, 4, 2)
        pair = projection_pair(measure)
        expected = sys_.R @ pair.F @ sys_.R @ pair.E
        trace = memory_kernel(sys_, measure, [0.0, 0.5])
        assert np.allclose(trace.values[0], expected, atol=1e-13)

    def test_model_mode_uncorrelated(self):
        xi, t = 2.0, 0.9
        sys_ = LinearSystem(R=mode_generator(xi), u0=np.array([1.0 + 0j, 0.0]))
        trace = memory_kernel(sys_, mode_measure(0.0), [0.0, t])
        assert trace.values[1][0, 0] == pytest.approx(-xi**2 * np.exp(-t), abs=1e-12)

    def test_right_block_column_exactly_zero(self):
        rng = np.random.default_rng(5)
        sys_ = random_system(rng, 3)
        measure = random_measure(rng, 3, 1)
        trace = memory_kernel(sys_, measure, [0.0, 0.4, 1.1])
        assert np.all(trace.values[:, :, 1:] == 0.0)

    def test_trace_validation(self):
        rng = np.random.default_rng(6)
        sys_ = random_system(rng, 3)
        measure = random_measure(rng, 3, 1)
        with pytest.raises(ValueError):
            memory_kernel(sys_, measure, [0.5, 0.4])


class TestSolveFullOp:
    def test_zero_kernel_reduces_to_projected_exponential(self):
        # block-diagonal generator + diagonal measure: no memory at all
        R = np.zeros((4, 4))
        R[:2, :2] = np.array([[-0.5, 0.3], [0.1, -0.2]])
        R[2:, 2:] = np.array([[-1.0, 0.0], [0.2, -0.7]])
        sys_ = LinearSystem(R=R, u0=np.array([1.0, -1.0, 0.4, 0.2]))
        measure = GaussianMeasure(A=np.eye(4), m=np.zeros(4), k=2)
        times, traj = solve_full_op(sys_, measure, 1.0, 1e-3)
        exact = expm(1.0 * R[:2, :2]) @ sys_.u0[:2]
        assert np.abs(traj[-1] - exact).max() < 1e-7

    def test_model_mode_matches_mean(self):
        beta, xi = 0.5, 2 * np.pi
        sys_ = LinearSystem(R=mode_generator(xi), u0=np.array([1.0 + 0j, 0.0]))
        _, traj = solve_full_op(sys_, mode_measure(beta), 1.0, 1e-3)
        assert abs(traj[-1, 0] - mean_mode(beta, xi, 1.0)) < 1e-4

    def test_second_order_convergence(self):
        rng = np.random.default_rng(7)
        sys_ = random_system(rng, 4)
        measure = random_measure(rng, 4, 2)
        exact = mean_solution(sys_, measure, 1.0)[:2]
        errs = []
        for dt in (2e-3, 1e-3):
            _, traj = solve_full_op(sys_, measure, 1.0, dt)
            errs.append(np.abs(traj[-1] - exact).max())
        assert 3.0 < errs[0] / errs[1] < 5.0

    def test_instability_detected(self):
        sys_ = LinearSystem(R=10.0 * np.eye(2), u0=np.array([1.0, 1.0]))
        measure = GaussianMeasure(A=np.eye(2), m=np.zeros(2), k=1)
        with pytest.raises(InstabilityError):
            solve_full_op(sys_, measure, 3.0, 1e-2)


class TestReconstructUnresolved:
    def test_zero_kernel_case(self):
        R = np.zeros((4, 4))
        R[:2, :2] = np.array([[-0.5, 0.3], [0.1, -0.2]])
        R[2:, :2] = np.array([[0.4, 0.0], [0.0, -0.3]])
        sys_ = LinearSystem(R=R, u0=np.array([1.0, -1.0, 0.0, 0.0]))
        measure = GaussianMeasure(A=np.eye(4), m=np.zeros(4), k=2)
        times, traj = solve_full_op(sys_, measure, 1.0, 1e-3)
        u_F = reconstruct_unresolved(sys_, measure, times, traj)
        exact = mean_solution(sys_, measure, 1.0)
        assert np.abs(u_F[-1] - exact[2:]).max() < 1e-6

    def test_matches_mean_solution_unresolved_block(self):
        rng = np.random.default_rng(8)
        sys_ = random_system(rng, 3)
        measure = random_measure(rng, 3, 1)
        times, traj = solve_full_op(sys_, measure, 0.8, 5e-4)
        u_F = reconstruct_unresolved(sys_, measure, times, traj)
        exact = mean_solution(sys_, measure, 0.8)
        assert np.abs(u_F[-1] - exact[1:]).max() < 1e-6
        assert np.allclose(u_F[0], measure.coupling() @ sys_.u0[:1], atol=1e-14)

    def test_second_order_convergence(self):
        rng = np.random.default_rng(9)
        sys_ = random_system(rng, 4)
        measure = random_measure(rng, 4, 2)
        exact = mean_solution(sys_, measure, 1.0)[2:]
        errs = []
        for dt in (2e-3, 1e-3):
            times, traj = solve_full_op(sys_, measure, 1.0, dt)
            u_F = reconstruct_unresolved(sys_, measure, times, traj)
            errs.append(np.abs(u_F[-1] - exact).max())
        assert 3.0 < errs[0] / errs[1] < 5.0


class TestReducedGenerators:
    def test_foop_diagonal_measure(self):
        rng = np.random.default_rng(10)
        sys_ = random_system(rng, 4)
        measure = GaussianMeasure(A=np.eye(4), m=np.zeros(4), k=2)
        assert np.array_equal(foop_generator(sys_, measure), sys_.R[:2, :2])

    def test_foop_model_mode(self):
        beta, xi = 0.5, 3.0
        sys_ = LinearSystem(R=mode_generator(xi), u0=np.array([1.0 + 0j, 0.0]))
        out = foop_generator(sys_, mode_measure(beta))
        assert out[0, 0] == pytest.approx(-1.0 + 1j * beta * xi, abs=1e-14)

    def test_foop_identity_generator(self):
        sys_ = LinearSystem(R=np.eye(2), u0=np.ones(2))
        measure = GaussianMeasure(A=np.array([[2.0, 1.0], [1.0, 2.0]]),
                                  m=np.zeros(2), k=1)
        assert foop_generator(sys_, measure)[0, 0] == pytest.approx(1.0, abs=1e-14)

    def test_soop_crescendo_starts_at_foop(self):
        rng = np.random.default_rng(11)
        sys_ = random_system(rng, 3)
        measure = random_measure(rng, 3, 1)
        gen = soop_generator(sys_, measure, tau=0.4, t=0.0, policy="crescendo")
        assert np.allclose(gen, foop_generator(sys_, measure), atol=1e-15)

    def test_soop_model_mode_memory_block(self):
        beta, xi = 0.5, 3.0
        sys_ = LinearSystem(R=mode_generator(xi), u0=np.array([1.0 + 0j, 0.0]))
        measure = mode_measure(beta)
        tau = 0.7
        gen = soop_generator(sys_, measure, tau=tau, policy="constant")
        memory = gen - foop_generator(sys_, measure)
        assert memory[0, 0] == pytest.approx(-tau * (1 - beta**2) * xi**2, abs=1e-12)

    def test_soop_crescendo_saturates_at_tau(self):
        rng = np.random.default_rng(12)
        sys_ = random_system(rng, 3)
        measure = random_measure(rng, 3, 2)
        tau = 1.0 / 3.0
        ramp = soop_generator(sys_, measure, tau, t=0.2, policy="crescendo")
        sat = soop_generator(sys_, measure, tau, t=1.0, policy="crescendo")
        const = soop_generator(sys_, measure, tau, policy="constant")
        assert np.array_equal(sat, const)
        assert not np.allclose(ramp, const)

    def test_soop_trapezoidal_halves_coefficient(self):
        rng = np.random.default_rng(13)
        sys_ = random_system(rng, 3)
        measure = random_measure(rng, 3, 1)
        base = foop_generator(sys_, measure)
        half = soop_generator(sys_, measure, 0.6, policy="trapezoidal") - base
        full = soop_generator(sys_, measure, 0.6, policy="constant") - base
        assert np.allclose(half, 0.5 * full, atol=1e-15)

    def test_soop_rejects_bad_tau(self):
        rng = np.random.default_rng(14)
        sys_ = random_system(rng, 3)
        measure = random_measure(rng, 3, 1)
        with pytest.raises(ValueError):
            soop_generator(sys_, measure, tau=0.0)

    def test_four_term_expansion_matches_block_product(self):
        rng = np.random.default_rng(15)
        for _ in range(10):
            n = int(rng.integers(3, 6))
            k = int(rng.integers(1, n))
            sys_ = random_system(rng, n)
            measure = random_measure(rng, n, k)
            W = measure.coupling()
            R = sys_.R
            R_CC, R_CF = R[:k, :k], R[:k, k:]
            R_FC, R_FF = R[k:, :k], R[k:, k:]
            four = (R_CF @ R_FC + R_CF @ R_FF @ W
                    - R_CF @ W @ R_CC - R_CF @ W @ R_CF @ W)
            pair = projection_pair(measure)
            direct = (R @ pair.F @ R @ pair.E)[:k, :k]
            assert np.abs(four - direct).max() < 1e-12


class TestOperatorIdentities:
    def test_dyson_identity(self):
        rng = np.random.default_rng(16)
        for _ in range(5):
            n = int(rng.integers(2, 6))
            k = int(rng.integers(1, n))
            sys_ = random_system(rng, n)
            measure = random_measure(rng, n, k)
            t = float(rng.uniform(0.5, 2.0))
            assert dyson_residual(sys_.R, measure, t, dt=1e-3) < 1e-6

    def test_solution_operator_time_derivative(self):
        # d/dt e^{tR} = (RE) e^{tR} + e^{tRF} RF + int_0^t K(t-s) e^{sR} ds  (central FD)
        rng = np.random.default_rng(17)
        sys_ = random_system(rng, 3)
        measure = random_measure(rng, 3, 1)
        pair = projection_pair(measure)
        R, E, F = sys_.R, pair.E, pair.F
        RF, RE = R @ F, R @ E
        t, h = 0.8, 1e-3
        lhs = (expm((t + h) * R) - expm((t - h) * R)) / (2 * h)
        m = 800
        hs = t / m
        conv = np.zeros_like(R)
        for j in range(m + 1):
            w = 0.5 if j in (0, m) else 1.0
            conv += w * (expm((t - j * hs) * RF) @ RF @ RE @ expm(j * hs * R))
        conv *= hs
        rhs = RE @ expm(t * R) + expm(t * RF) @ RF + conv
        assert np.abs(lhs - rhs).max() < 1e-4
