import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings, strategies as st

from simulation.field_core import (
    GridSpec, Samples, SimulationConfig, StateVector, Uniform, build_initial_field, sine_mode,
)
from simulation.lambda_scheme import (
    DivisionNearZero, SingularOrIllConditioned, StepOperator, TridiagonalSystem,
    amplification_factor, assemble_step_system, discrete_l2_norm, packet_speed, simulate, solve_tridiagonal,
    step,
)


def dense(system):
    n = len(system)
    a = np.diag(system.diag).astype(np.complex128)
    if n > 1:
        a += np.diag(system.sub, -1) + np.diag(system.sup, 1)
    return a


def random_system(rng, n):
    """Diagonally dominant complex system, well conditioned for any n"""
    def draw(size):
        return rng.normal(size=size) + 1j * rng.normal(size=size)
    sub, sup = draw(n - 1), draw(n - 1)
    bound = 1.0 + np.abs(np.concatenate(([0], sub))) + np.abs(np.concatenate((sup, [0])))
    diag = bound * (1 + rng.uniform(size=n)) * np.exp(1j * rng.uniform(0, 2 * np.pi, n))
    return TridiagonalSystem(sub, diag, sup, draw(n))


def small_config(**changes):
    base = dict(grid=GridSpec(n_points=41), dt=1e-4, n_steps=20, snapshot_stride=5)
    base.update(changes)
    return SimulationConfig(**base)


class SolveTridiagonalTests(SimpleTestCase):

    def test_identity(self):
        b = np.array([1 + 2j, -3, 0.5j, 4])
        system = TridiagonalSystem(np.zeros(3), np.ones(4), np.zeros(3), b)
        np.testing.assert_array_equal(solve_tridiagonal(system), b)

    def test_symmetric_two_by_two(self):
        system = TridiagonalSystem([1], [2, 2], [1], [3, 3])
        np.testing.assert_allclose(solve_tridiagonal(system), [1, 1], rtol=0, atol=1e-15)

    def test_matches_dense_oracle_on_random_systems(self):
        rng = np.random.default_rng(20240611)
        for trial in range(200):
            n = int(rng.integers(1, 13))
            system = random_system(rng, n)
            expected = np.linalg.solve(dense(system), system.rhs)
            with self.subTest(trial=trial, n=n):
                np.testing.assert_allclose(solve_tridiagonal(system), expected, rtol=0, atol=1e-12)

    def test_zero_pivot_is_rejected(self):
        system = TridiagonalSystem([1], [0, 1], [1], [1, 1])
        with self.assertRaises(SingularOrIllConditioned):
            solve_tridiagonal(system)

    def test_inconsistent_lengths(self):
        with self.assertRaises(ValueError):
            TridiagonalSystem([1, 1], [1, 1], [1], [1, 1])


class AssembleStepSystemTests(SimpleTestCase):

    def test_hand_substituted_coefficients(self):
        cfg = SimulationConfig(grid=GridSpec(n_points=5), lam=1.0, c_coef=1j, dt=1 / 16, n_steps=1)
        prev = build_initial_field(Uniform(1.0), cfg.grid)
        system = assemble_step_system(prev, cfg)
        np.testing.assert_array_equal(system.diag, [1, 1 + 1j, 1 + 1j, 1 + 1j, 1])
        np.testing.assert_array_equal(system.sub, [-1j, -1j, -1j, 0])
        np.testing.assert_array_equal(system.sup, [0, -1j, -1j, -1j])
        np.testing.assert_array_equal(system.rhs, prev.values)

    def test_lambda_two_is_backward_euler(self):
        cfg = small_config(lam=2.0, c_coef=0.7)
        system = assemble_step_system(build_initial_field(Uniform(1.0), cfg.grid), cfg)
        rho = cfg.rho
        n = cfg.grid.n_points
        expected = np.eye(n, dtype=np.complex128)
        for j in range(1, n - 1):
            expected[j, j - 1] = -rho
            expected[j, j] = 1 + 2 * rho
            expected[j, j + 1] = -rho
        np.testing.assert_array_equal(dense(system), expected)


class StepTests(SimpleTestCase):

    def test_zero_is_a_fixed_point(self):
        cfg = small_config()
        nxt = step(StateVector(np.zeros(cfg.grid.n_points)), cfg)
        self.assertFalse(np.any(nxt.values))
        self.assertEqual(nxt.time_index, 1)

    def test_modes_are_eigenvectors(self):
        grid = GridSpec(n_points=41)
        for lam in (0.5, 1.0, 1.5, 2.0):
            for c in (0.5j, 1.0j):
                cfg = SimulationConfig(grid=grid, lam=lam, c_coef=c)
                for k in (1, 3, 7):
                    mode = sine_mode(k, grid)
                    g = amplification_factor(k, cfg)
                    with self.subTest(lam=lam, c=c, k=k):
                        np.testing.assert_allclose(step(mode, cfg).values, g * mode.values, rtol=0, atol=1e-10)

    def test_one_step_matches_dense_oracle(self):
        cfg = SimulationConfig(grid=GridSpec(n_points=12), lam=0.8, c_coef=1j, dt=1e-3)
        prev = build_initial_field(Uniform(1.0), cfg.grid)
        system = assemble_step_system(prev, cfg)
        expected = np.linalg.solve(dense(system), system.rhs)
        np.testing.assert_allclose(step(prev, cfg).values, expected, rtol=0, atol=1e-12)

    @settings(deadline=None, max_examples=40)
    @given(
        st.integers(min_value=0, max_value=2 ** 32 - 1),
        st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
        st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
    )
    def test_linearity(self, seed, a, b):
        cfg = small_config(lam=1.3)
        rng = np.random.default_rng(seed)
        n = cfg.grid.n_points
        u = build_initial_field(Samples(rng.normal(size=n) + 1j * rng.normal(size=n)), cfg.grid)
        v = build_initial_field(Samples(rng.normal(size=n) + 1j * rng.normal(size=n)), cfg.grid)
        combined = step(StateVector(a * u.values + b * v.values), cfg)
        expected = a * step(u, cfg).values + b * step(v, cfg).values
        np.testing.assert_allclose(combined.values, expected, rtol=0, atol=1e-10)


class AmplificationFactorTests(SimpleTestCase):

    def test_unit_for_vanishing_rho(self):
        cfg = SimulationConfig(grid=GridSpec(n_points=21), c_coef=0j)
        for k in range(1, 20):
            self.assertEqual(amplification_factor(k, cfg), 1)

    def test_bounded_by_one_for_imaginary_c(self):
        grid = GridSpec(n_points=51)
        for lam in np.linspace(0.05, 1.95, 12):
            cfg = SimulationConfig(grid=grid, lam=lam, c_coef=1.5j)
            for k in range(1, 50):
                self.assertLessEqual(abs(amplification_factor(k, cfg)), 1.0)

    def test_small_angle_series(self):
        cfg = SimulationConfig(grid=GridSpec(n_points=2001), lam=2.0, c_coef=1j, dt=1e-9)
        eps = 1 - np.cos(np.pi / 2000)
        expected = 1 / (1 + 2 * cfg.rho * eps)
        self.assertAlmostEqual(abs(amplification_factor(1, cfg) - expected), 0.0, places=12)

    def test_mode_index_range(self):
        cfg = SimulationConfig(grid=GridSpec(n_points=11))
        for k in (0, 10):
            with self.subTest(k=k), self.assertRaises(ValueError):
                amplification_factor(k, cfg)

    def test_vanishing_denominator(self):
        # rho = -1, lam = 1 and cos(pi/2) = 0 for k = 2
        cfg = SimulationConfig(grid=GridSpec(n_points=5), lam=1.0, c_coef=-1.0, dt=1 / 16)
        with self.assertRaises(DivisionNearZero):
            amplification_factor(2, cfg)


class PacketSpeedTests(SimpleTestCase):

    def test_default_configuration(self):
        self.assertAlmostEqual(packet_speed(SimulationConfig()), 200 * np.sqrt(3), places=9)

    def test_matches_phase_slope_of_amplification_factor(self):
        cfg = SimulationConfig()
        # modes 66 and 67 straddle cos(theta) = 1/2 on the 201-point grid
        slope = abs(np.angle(amplification_factor(67, cfg)) - np.angle(amplification_factor(66, cfg)))
        nodes_per_step = slope / (np.pi / (cfg.grid.n_points - 1))
        self.assertAlmostEqual(nodes_per_step * cfg.grid.h / cfg.dt / packet_speed(cfg), 1.0, delta=0.01)

    def test_scales_with_imaginary_part(self):
        cfg = SimulationConfig(lam=0.6)
        self.assertAlmostEqual(packet_speed(cfg.replace(c_coef=1.5j)), 1.5 * packet_speed(cfg), places=9)
        self.assertAlmostEqual(packet_speed(cfg.replace(c_coef=-1j)), packet_speed(cfg), places=9)

    def test_no_undamped_mode(self):
        self.assertEqual(packet_speed(SimulationConfig(lam=2.0)), 0.0)
        self.assertEqual(packet_speed(SimulationConfig(lam=-2.5)), 0.0)
        self.assertEqual(packet_speed(SimulationConfig(c_coef=1.0)), 0.0)

class SimulateTests(SimpleTestCase):

    def test_snapshot_contract(self):
        traj = simulate(small_config(n_steps=12, snapshot_stride=5))
        self.assertEqual(traj.time_indices, [0, 5, 10, 12])
        self.assertEqual(len(traj), 4)
        np.testing.assert_allclose(traj.times, [0, 5e-4, 1e-3, 1.2e-3])
        self.assertEqual(traj.values.shape, (4, 41))

    def test_single_step(self):
        traj = simulate(small_config(n_steps=1))
        self.assertEqual(traj.time_indices, [0, 1])

    def test_observer_sees_every_step(self):
        cfg = small_config(n_steps=12, snapshot_stride=5)
        seen = []
        traj = simulate(cfg, observer=seen.append)
        self.assertEqual([s.time_index for s in seen], list(range(13)))
        for snapshot in traj.snapshots:
            self.assertEqual(seen[snapshot.time_index], snapshot)

    def test_zero_initial_field_stays_zero(self):
        traj = simulate(small_config(ic=Uniform(0.0)))
        self.assertFalse(np.any(traj.values))

    def test_mode_evolution(self):
        cfg = small_config(lam=2.0, c_coef=1j, n_steps=40, snapshot_stride=10)
        mode = sine_mode(1, cfg.grid)
        cfg = cfg.replace(ic=Samples(mode.values))
        g = amplification_factor(1, cfg)
        for snapshot in simulate(cfg).snapshots:
            np.testing.assert_allclose(snapshot.values, g ** snapshot.time_index * mode.values, rtol=0, atol=1e-8)

    def test_cached_and_uncached_runs_are_bit_identical(self):
        cfg = small_config(lam=0.7, n_steps=60, snapshot_stride=7)
        cached = simulate(cfg, cache_factorization=True)
        fresh = simulate(cfg, cache_factorization=False)
        self.assertEqual(cached.time_indices, fresh.time_indices)
        np.testing.assert_array_equal(cached.values, fresh.values)

    def test_deterministic(self):
        cfg = small_config(lam=1.2, n_steps=30)
        np.testing.assert_array_equal(simulate(cfg).values, simulate(cfg).values)

    def test_step_operator_matches_step(self):
        cfg = small_config(lam=0.4)
        prev = build_initial_field(Uniform(1.0), cfg.grid)
        self.assertEqual(StepOperator(cfg)(prev), step(prev, cfg))

    def test_norm_never_increases_for_imaginary_c(self):
        for lam in (0.25, 1.0, 1.75):
            cfg = SimulationConfig(lam=lam, c_coef=1j, n_steps=2000, snapshot_stride=1)
            norms = simulate(cfg).norms()
            with self.subTest(lam=lam):
                self.assertTrue(np.all(norms[1:] <= norms[:-1] * (1 + 1e-12)))

    def test_singular_step_matrix_reports_step(self):
        # rho = -1 zeroes the first interior pivot
        cfg = SimulationConfig(grid=GridSpec(n_points=5), lam=1.0, c_coef=-1.0, dt=1 / 16, n_steps=3)
        with self.assertRaises(SingularOrIllConditioned) as ctx:
            simulate(cfg)
        self.assertEqual(ctx.exception.step_index, 1)
        with self.assertRaises(SingularOrIllConditioned) as ctx:
            simulate(cfg, cache_factorization=False)
        self.assertEqual(ctx.exception.step_index, 1)

    def test_discrete_l2_norm(self):
        grid = GridSpec(n_points=5)
        state = StateVector([0, 1, 1j, -1, 0])
        self.assertAlmostEqual(discrete_l2_norm(state, grid), np.sqrt(0.25 * 3))
