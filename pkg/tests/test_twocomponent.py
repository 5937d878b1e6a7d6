import numpy as np
import pytest

from opclosure import twocomponent as tc
from opclosure.measures import projection_pair
from opclosure.prediction import LinearSystem, foop_generator, mean_solution, memory_kernel


def pulse(x):
    return np.exp(-500.0 * (x - 0.5) ** 2)


class TestShift:
    def test_grid_multiple_is_circular(self):
        rng = np.random.default_rng(0)
        vals = rng.standard_normal(64)
        out = tc.shift(vals, 5 / 64)
        assert np.array_equal(out, np.roll(vals, 5))

    def test_spectral_matches_circular_on_grid_multiples(self):
        x = tc.grid(128)
        vals = np.sin(2 * np.pi * x) + 0.5 * np.cos(6 * np.pi * x)
        spectral = tc.shift(vals + 0.0, 7 / 128 + 1e-13)  # just off the tolerance path
        circular = np.roll(vals, 7)
        assert np.abs(spectral - circular).max() < 1e-11

    def test_fractional_shift_of_mode(self):
        x = tc.grid(64)
        vals = np.cos(2 * np.pi * x)
        out = tc.shift(vals, 0.125 / 3)
        assert np.abs(out - np.cos(2 * np.pi * (x - 0.125 / 3))).max() < 1e-12


class TestExactSolution:
    def test_time_zero_identity(self):
        x = tc.grid(100)
        state = tc.ModelState(u1=pulse(x), u2=0.3 * pulse(x), beta=0.5)
        out = tc.exact_solution(state, 0.0)
        assert np.allclose(out.u1, state.u1, atol=1e-13)
        assert np.allclose(out.u2, state.u2, atol=1e-13)

    def test_equal_components_ride_one_characteristic(self):
        x = tc.grid(200)
        f = pulse(x)
        state = tc.ModelState(u1=f, u2=f.copy())
        t = 0.3
        out = tc.exact_solution(state, t)
        expected = np.exp(-t) * tc.shift(f, -t)
        assert np.abs(out.u1 - expected).max() < 1e-12
        assert np.abs(out.u2 - expected).max() < 1e-12

    def test_pulse_splits_into_half_weight_characteristics(self):
        n = 400
        x = tc.grid(n)
        f = pulse(x)
        state = tc.ModelState(u1=f, u2=np.zeros(n))
        t = 0.25
        out = tc.exact_solution(state, t)
        expected = 0.5 * np.exp(-t) * (pulse(x + t) + pulse(x - t))
        assert np.abs(out.u1 - expected).max() < 1e-10


class TestMeanSolution:
    def test_uncorrelated_equal_split(self):
        x = tc.grid(256)
        out = tc.mean_solution(pulse(x), 0.0, 0.2)
        expected = 0.5 * np.exp(-0.2) * (pulse(x + 0.2) + pulse(x - 0.2))
        assert np.abs(out.u1 - expected).max() < 1e-10

    def test_weights_read_off_correlation(self):
        x = tc.grid(256)
        beta, t = 0.5, 0.3
        out = tc.mean_solution(pulse(x), beta, t)
        expected = np.exp(-t) * (0.75 * pulse((x + t) % 1.0) + 0.25 * pulse((x - t) % 1.0))
        assert np.abs(out.u1 - expected).max() < 1e-10

    def test_degenerate_correlation_is_exact(self):
        x = tc.grid(200)
        f = pulse(x)
        t = 0.4
        mean = tc.mean_solution(f, 1.0, t)
        exact = tc.exact_solution(tc.ModelState(u1=f, u2=f.copy(), beta=1.0), t)
        assert np.abs(mean.u1 - exact.u1).max() < 1e-12
        assert np.abs(mean.u2 - exact.u2).max() < 1e-12

    def test_mass_decays_at_unit_rate_for_every_correlation(self):
        x = tc.grid(128)
        f = pulse(x)
        mass0 = f.sum() / len(x)
        for beta in (0.0, 0.5, 0.9):
            for t in (0.1, 0.7):
                out = tc.mean_solution(f, beta, t)
                assert out.u1.sum() / len(x) == pytest.approx(
                    np.exp(-t) * mass0, rel=1e-12)


class TestFoopSolution:
    def test_time_zero(self):
        x = tc.grid(100)
        assert np.allclose(tc.foop_solution(pulse(x), 0.7, 0.0), pulse(x), atol=1e-13)

    def test_uncorrelated_decays_in_place(self):
        x = tc.grid(100)
        out = tc.foop_solution(pulse(x), 0.0, 0.5)
        assert np.abs(out - np.exp(-0.5) * pulse(x)).max() < 1e-13

    def test_translation_convention(self):
        # the reduced profile moves toward negative x for positive correlation
        n = 512
        x = tc.grid(n)
        beta, t = 0.5, 1.0
        out = tc.foop_solution(pulse(x), beta, t)
        expected = np.exp(-t) * pulse((x + beta * t) % 1.0)
        assert np.abs(out - expected).max() < 1e-10


class TestModelMemoryKernel:
    def test_time_zero_uncorrelated(self):
        xi = 3.0
        K = tc.model_memory_kernel(0.0, 0.0, xi)
        assert np.allclose(K, [[-xi**2, 0.0], [-1j * xi, 0.0]], atol=1e-14)

    def test_zero_mode_vanishes(self):
        assert np.all(tc.model_memory_kernel(0.5, 0.7, 0.0) == 0.0)

    def test_matches_engine_kernel(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            beta = float(rng.uniform(-0.9, 0.9))
            xi = float(rng.uniform(-8.0, 8.0))
            t = float(rng.uniform(0.0, 2.0))
            sys_ = LinearSystem(R=tc.mode_generator(xi),
                                u0=np.array([1.0 + 0j, 0.0]))
            trace = memory_kernel(sys_, tc.mode_measure(beta), [0.0, max(t, 1e-9)])
            assert np.abs(trace.values[-1]
                          - tc.model_memory_kernel(beta, trace.times[-1], xi)).max() < 1e-9


class TestPerModeEquivalence:
    def test_mean_solution_against_engine(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            beta = float(rng.uniform(-0.9, 0.9))
            xi = float(rng.uniform(-6.0, 6.0))
            t = float(rng.uniform(0.0, 2.0))
            sys_ = LinearSystem(R=tc.mode_generator(xi),
                                u0=np.array([1.0 + 0j, 0.0]))
            out = mean_solution(sys_, tc.mode_measure(beta), t)
            assert abs(out[0] - tc.mean_mode(beta, xi, t)) < 1e-8

    def test_reduced_generator_against_engine(self):
        beta, xi = 0.6, 4.0
        sys_ = LinearSystem(R=tc.mode_generator(xi), u0=np.array([1.0 + 0j, 0.0]))
        gen = foop_generator(sys_, tc.mode_measure(beta))
        assert gen[0, 0] == pytest.approx(-1.0 + 1j * beta * xi, abs=1e-14)

    def test_integration_by_parts_identity(self):
        # 1 + (int_0^t e^{-s} Delta_{beta s} ds)(-i beta xi - 1) = e^{-t} Delta_{beta t}
        beta, xi, t = 0.45, 2.2, 1.3
        s = np.linspace(0.0, t, 20001)
        phi = np.trapezoid(np.exp(-s) * np.exp(-1j * beta * xi * s), s)
        lhs = 1.0 + phi * (-1j * beta * xi - 1.0)
        rhs = np.exp(-t) * np.exp(-1j * beta * xi * t)
        assert abs(lhs - rhs) < 1e-8

    def test_orthogonal_solution_operator_form(self):
        beta, xi, t = 0.3, 1.7, 0.9
        measure = tc.mode_measure(beta)
        RF = tc.mode_generator(xi) @ projection_pair(measure).F
        phi = (1.0 - np.exp(-(1.0 + 1j * beta * xi) * t)) / (1.0 + 1j * beta * xi)
        from opclosure.prediction import orthogonal_propagate
        sys_ = LinearSystem(R=tc.mode_generator(xi), u0=np.array([1.0 + 0j, 0.0]))
        out = orthogonal_propagate(sys_, measure, t)
        assert np.abs(out - (np.eye(2) + phi * RF)).max() < 1e-10


class TestFullOpIdentity:
    def test_zero_mode_pure_decay(self):
        assert tc.verify_full_op_identity(0.5, 0.0, 1.0, 1e-3) < 1e-12

    def test_generic_mode_bound(self):
        assert tc.verify_full_op_identity(0.5, 2 * np.pi, 1.0, 1e-3) < 1e-4

    def test_uncorrelated_mode_bound(self):
        assert tc.verify_full_op_identity(0.0, 2 * np.pi, 1.0, 1e-3) < 1e-4

    def test_second_order_in_dt(self):
        e1 = tc.verify_full_op_identity(0.5, 2 * np.pi, 1.0, 2e-3)
        e2 = tc.verify_full_op_identity(0.5, 2 * np.pi, 1.0, 1e-3)
        assert 3.0 < e1 / e2 < 5.0


class TestModelState:
    def test_rejects_mismatched_grids(self):
        with pytest.raises(ValueError):
            tc.ModelState(u1=np.zeros(4), u2=np.zeros(5))

    def test_rejects_indefinite_measure_parameters(self):
        with pytest.raises(ValueError):
            tc.ModelState(u1=np.zeros(4), u2=np.zeros(4), beta=1.2, gamma=1.0)

    def test_allows_degenerate_boundary(self):
        tc.ModelState(u1=np.zeros(4), u2=np.zeros(4), beta=1.0, gamma=1.0)
