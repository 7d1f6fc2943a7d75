import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from cgmvi import metrics, problems, solver
from cgmvi.errors import InfeasibleLinearizationError, InvalidConfigError
from cgmvi.utils import oracles


class TestSolverConfig(unittest.TestCase):

    def test_01_defaults_are_valid(self):
        config = solver.SolverConfig().validate()
        self.assertEqual(config.alpha, 'from-theorem')
        self.assertFalse(config.include_aux)
        solver.SolverConfig(epsilon=0.0).validate()

    def test_02_invalid_settings(self):
        for settings in ({'T': 0}, {'T': 2.5}, {'schedule': 'cosine'}, {'eta': -0.1}, {'alpha': 'auto'},
                         {'alpha': 0.0}, {'epsilon': -1e-3}, {'averaging': 'median'}, {'gamma': 1.0},
                         {'init': 'zeros'}, {'qp_method': 'simplex'}, {'mu': 0.0}, {'fallback_threshold': 0}):
            with self.assertRaises(InvalidConfigError, msg=str(settings)):
                solver.SolverConfig.from_dict(settings).validate()

    def test_03_unknown_setting(self):
        with self.assertRaises(InvalidConfigError):
            solver.SolverConfig.from_dict({'step': 0.1})

    def test_04_round_trip(self):
        config = solver.SolverConfig(T=7, eta=0.2, alpha=3.0, x0=np.array([1.0, 2.0]))
        self.assertEqual(solver.SolverConfig.from_dict(config.to_dict()).to_dict(), config.to_dict())


class TestSchedules(unittest.TestCase):

    def test_01_theorem1(self):
        problem = problems.make_matrix_game_quadratic(2, seed=1)
        eta, alpha = solver.schedule_theorem1(problem, 200)
        D, L_F = problem.constants.D, problem.constants.L_F
        self.assertAlmostEqual(eta, D / (5.0 * L_F * np.sqrt(400.0)))
        self.assertAlmostEqual(alpha, L_F / D)

    def test_02_theorem2(self):
        problem = problems.make_affine_ball(3, mu=2.0)
        schedule, alpha = solver.schedule_theorem2(problem, gamma=3.0)
        self.assertAlmostEqual(alpha, 1.0)
        self.assertAlmostEqual(schedule.step(0), 0.5)
        self.assertAlmostEqual(schedule.step(9), 0.05)

    def test_03_theorem2_needs_strong_monotonicity(self):
        with self.assertRaises(InvalidConfigError):
            solver.schedule_theorem2(problems.make_matrix_game_quadratic(2), gamma=3.0)

    def test_04_theorem3(self):
        problem = problems.make_ball_minimization(np.array([2.0, 0.0]))
        eta, alpha = solver.schedule_theorem3(problem, 64)
        self.assertAlmostEqual(eta, np.log(64) / 64)
        self.assertEqual(alpha, 1.0)
        with self.assertRaises(InvalidConfigError):
            solver.schedule_theorem3(problem, 3)

    def test_05_resolve_defaults(self):
        problem = problems.make_matrix_game_quadratic(2, seed=1)
        schedule, alpha, averaging = solver.resolve_schedule(problem, solver.SolverConfig(T=50, alpha=7.0))
        self.assertEqual(averaging, 'uniform')
        self.assertEqual(alpha, 7.0)
        self.assertAlmostEqual(schedule.step(3), solver.schedule_theorem1(problem, 50)[0])
        schedule, alpha, averaging = solver.resolve_schedule(
            problems.make_affine_ball(2), solver.SolverConfig(schedule='inverse-t'))
        self.assertEqual(averaging, 'linear-weight')
        _, _, averaging = solver.resolve_schedule(
            problems.make_ball_minimization(np.array([2.0, 0.0])), solver.SolverConfig(T=64, schedule='log-over-T'))
        self.assertEqual(averaging, 'last')


class TestAveraging(unittest.TestCase):

    def test_01_schemes(self):
        iterates = np.array([[0.0], [1.0], [2.0], [3.0]])
        assert_allclose(solver.average_iterates(iterates, 'uniform'), [1.5])
        assert_allclose(solver.average_iterates(iterates, 'linear-weight'), [14.0 / 6.0])
        assert_allclose(solver.average_iterates(iterates, 'last'), [3.0])
        with self.assertRaises(InvalidConfigError):
            solver.average_iterates(iterates, 'median')

    def test_02_running_average_matches(self):
        problem = problems.make_affine_ball(3, seed=4)
        for scheme in ('uniform', 'linear-weight'):
            config = solver.SolverConfig(T=30, eta=0.05, alpha=2.0, averaging=scheme, seed=1)
            output, trace = solver.cgm_run(problem, config)
            assert_allclose(output, solver.average_iterates(trace.iterates[:-1], scheme), atol=1e-12)

    def test_03_last_iterate(self):
        problem = problems.make_affine_ball(3, seed=4)
        output, trace = solver.cgm_run(problem, solver.SolverConfig(T=10, eta=0.05, alpha=2.0, averaging='last'))
        assert_array_equal(output, trace.iterates[-1])


class TestCGM(unittest.TestCase):

    def setUp(self):
        self.problem = problems.make_matrix_game_quadratic(2, seed=3)
        self.config = solver.SolverConfig(T=50, eta=0.01, alpha=5.0, seed=1, init='gaussian')

    def test_01_trace_layout(self):
        output, trace = solver.cgm_run(self.problem, self.config)
        self.assertEqual(trace.iterates.shape, (51, 4))
        self.assertEqual(trace.velocities.shape, (50, 4))
        self.assertEqual(trace.averages.shape, (50, 4))
        self.assertEqual(trace.T, 50)
        self.assertEqual(len(trace.to_frame()), 50)
        assert_array_equal(output, trace.averages[-1])

    def test_02_replay_is_exact(self):
        _, trace = solver.cgm_run(self.problem, self.config)
        self.assertEqual(trace.replay_error(), 0.0)

    def test_03_runs_are_deterministic(self):
        _, first = solver.cgm_run(self.problem, self.config)
        _, second = solver.cgm_run(self.problem, self.config)
        assert_array_equal(first.iterates, second.iterates)

    def test_04_callback_events(self):
        events = []
        _, gap_fn = metrics.gap_evaluator(self.problem)
        _, trace = solver.cgm_run(self.problem, self.config, callback=events.append, gap_fn=gap_fn)
        self.assertEqual([event.t for event in events], list(range(1, 51)))
        assert_allclose([event.feasibility for event in events], trace.report_feasibilities)
        assert_allclose([event.gap for event in events], trace.gaps)
        self.assertAlmostEqual(events[-1].gap, gap_fn(trace.output))

    def test_05_closed_form_steps(self):
        _, trace = solver.cgm_run(self.problem, self.config)
        constraint = self.problem.constraints[0]
        for x, v, count in zip(trace.iterates[:-1], trace.velocities, trace.active_counts):
            g, grad = constraint(x)
            if count:
                self.assertLessEqual(5.0 * g + grad @ v, 1e-9 * (1.0 + abs(g)))
            else:
                assert_allclose(v, -self.problem.F(x))

    def test_06_explicit_start(self):
        x0 = np.array([0.1, 0.0, -0.1, 0.0])
        _, trace = solver.cgm_run(self.problem, self.config, x0=x0)
        assert_array_equal(trace.iterates[0], x0)
        with self.assertRaises(InvalidConfigError):
            solver.cgm_run(self.problem, self.config, x0=np.zeros(3))

    def test_07_feasible_start(self):
        config = solver.SolverConfig(T=5, eta=0.01, alpha=5.0, init='feasible', seed=3)
        self.assertTrue(self.problem.is_feasible(solver.initial_point(self.problem, config)))

    def test_08_error_carries_the_iteration(self):
        flat = problems.Constraint(value=lambda x: 1.0, gradient=lambda x: np.zeros(2))
        problem = problems.ProblemInstance(name='flat', dim=2, operator=lambda x: x, constraints=(flat,),
                                           constants=problems.ProblemConstants(D=1.0))
        with self.assertRaises(InfeasibleLinearizationError) as context:
            solver.cgm_run(problem, solver.SolverConfig(T=3, eta=0.1, alpha=1.0, x0=[1.0, 1.0]))
        self.assertEqual(context.exception.iteration, 0)
        self.assertIn('(iteration 0)', str(context.exception))

    def test_09_generic_solvers_agree(self):
        problem = problems.make_matrix_game_multi(2, m=3, seed=2)
        ones = np.ones(problem.dim)
        # start outside every ellipsoid
        scale = 1.5 * max(np.sqrt(2.0 * c / (ones @ B @ ones))
                          for B, c in zip(problem.data['Bs'], problem.data['cs']))
        config = solver.SolverConfig(T=20, eta=0.01, alpha=2.0, x0=(scale * ones).tolist())
        _, active = solver.cgm_run(problem, config)
        self.assertEqual(active.active_counts[0], 3)
        config.qp_method = 'dual-pg'
        _, dual = solver.cgm_run(problem, config)
        assert_allclose(active.iterates, dual.iterates, atol=1e-3)
        self.assertIn('dual-pg', dual.solver_tags)

    def test_10_stochastic_runs_are_reproducible(self):
        problem = problems.make_toy_gan(sample_count=20, seed=1)
        config = solver.SolverConfig(T=10, eta=0.1, alpha=2.0, averaging='last', seed=4)
        _, first = solver.cgm_run(problem, config)
        _, second = solver.cgm_run(problem, config)
        assert_array_equal(first.iterates, second.iterates)
        config.seed = 5
        _, other = solver.cgm_run(problem, config)
        self.assertFalse(np.array_equal(first.iterates, other.iterates))

    def test_11_minimization_instance(self):
        halfspace = problems.Constraint(value=lambda x: 1.0 - x[0], gradient=lambda x: np.array([-1.0, 0.0]))
        spec = solver.gradient_operator(lambda x: x, objective=lambda x: 0.5 * float(x @ x))
        problem = solver.minimization_instance(spec, [halfspace], problems.ProblemConstants(D=10.0),
                                               reference_solution=np.array([1.0, 0.0]))
        self.assertEqual(problem.structure, 'single-constraint')
        output, _ = solver.cgm_run(problem, solver.SolverConfig(T=200, eta=0.1, alpha=1.0, averaging='last',
                                                                x0=[3.0, 2.0]))
        assert_allclose(output, [1.0, 0.0], atol=1e-6)
        with self.assertRaises(InvalidConfigError):
            solver.gradient_operator(None)


class TestForsaken(unittest.TestCase):

    def test_01_peak_violation_decreases_with_alpha(self):
        problem = problems.make_forsaken()
        peaks = []
        for alpha in (0.5, 2.0, 8.0):
            config = solver.SolverConfig(T=64, eta=0.1, alpha=alpha, averaging='last')
            _, trace = solver.cgm_run(problem, config)
            assert_allclose(trace.iterates[0], [0.5, 1.0])
            peaks.append(float(np.max(trace.feasibilities[1:])))
        print(peaks)
        self.assertGreater(peaks[0], peaks[1])
        self.assertGreater(peaks[1], peaks[2])


class TestSimplex(unittest.TestCase):

    def test_01_sum_residual_contracts(self):
        problem = problems.make_matrix_game_simplex(5, seed=0)
        config = solver.SolverConfig(T=60, eta=0.005, alpha=100.0, seed=2, init='gaussian')
        _, trace = solver.cgm_run(problem, config)
        residual = np.abs(trace.iterates.sum(axis=1) - 1.0)
        bound = 0.5 ** np.arange(61) * residual[0] + 1e-8
        self.assertTrue(np.all(residual <= bound))
        self.assertIn('simplex', trace.solver_tags)

    def test_02_matches_the_explicit_constraints(self):
        rng = np.random.default_rng(21)
        for case in range(20):
            problem = problems.make_matrix_game_simplex(int(rng.integers(1, 4)), seed=case)
            x = oracles.dyadic_simplex_point(rng, problem.dim)
            config = solver.SolverConfig(T=1, eta=float(rng.uniform(0.01, 0.5)),
                                         alpha=float(rng.uniform(0.5, 4.0)), averaging='last')
            direct, _ = solver.simplex_cgm_run(problem, config, x0=x)
            generic, _ = solver.cgm_run(problems.explicit_simplex(problem), config, x0=x)
            assert_allclose(direct, generic, atol=1e-8)

    def test_03_requires_the_simplex_structure(self):
        with self.assertRaises(InvalidConfigError):
            solver.simplex_cgm_run(problems.make_forsaken(), solver.SolverConfig(T=2, eta=0.1, alpha=1.0))

    def test_04_desk_scale_game(self):
        problem = problems.make_matrix_game_simplex(100, seed=3)
        _, gap_fn = metrics.gap_evaluator(problem, 'simplex-bound')
        config = solver.SolverConfig(T=1000, eta=0.005, alpha=100.0, seed=3, init='gaussian')
        _, trace = solver.cgm_run(problem, config, gap_fn=gap_fn)
        residual = np.abs(trace.iterates.sum(axis=1) - 1.0)
        bound = 0.5 ** np.arange(1001) * residual[0] + 1e-8
        self.assertTrue(np.all(residual <= bound))
        # gaps[9] is the reported point after ten iterations
        self.assertLessEqual(5.0 * trace.gaps[-1], trace.gaps[9])


class TestRates(unittest.TestCase):

    def test_01_monotone_rate(self):
        problem = problems.make_affine_ball(3, seed=0, mu=0.0, skew=0.0, center=np.zeros(3),
                                            shift=[1.0, 0.0, 0.0])
        _, gap_fn = metrics.gap_evaluator(problem, 'ellipsoid-strong')
        T_values = (64, 256, 1024)
        gaps = []
        for T in T_values:
            output, _ = solver.cgm_run(problem, solver.SolverConfig(T=T, x0=[0.0, 0.0, 0.0]))
            gaps.append(gap_fn(output))
            self.assertLessEqual(gaps[-1], metrics.theory_bounds(problem.constants, T).thm1_gap_bound)
        fit = metrics.rate_fit(T_values, gaps)
        print(gaps, fit.slope)
        self.assertGreater(fit.slope, -0.6)
        self.assertLess(fit.slope, -0.4)

    def test_02_strongly_monotone_rate(self):
        problem = problems.make_affine_ball(4, seed=0, mu=1.0, skew=1.0, center=np.zeros(4))
        _, gap_fn = metrics.gap_evaluator(problem, 'ellipsoid-strong')
        T_values = (64, 256, 1024)
        gaps = []
        for T in T_values:
            config = solver.SolverConfig(T=T, schedule='inverse-t', init='feasible', seed=0)
            output, trace = solver.cgm_run(problem, config)
            self.assertEqual(trace.averaging, 'linear-weight')
            gaps.append(gap_fn(output))
        fit = metrics.rate_fit(T_values, gaps)
        print(gaps, fit.slope)
        self.assertGreaterEqual(fit.slope, -1.25)
        self.assertLessEqual(fit.slope, -0.75)

    def test_03_convex_minimization(self):
        problem = problems.make_ball_minimization(np.array([2.0, 0.0, 0.0]))
        start = np.zeros(3)
        optimum = problem.objective(problem.reference_solution)
        for T in (64, 256):
            config = solver.SolverConfig(T=T, schedule='log-over-T', x0=start.tolist())
            output, trace = solver.cgm_run(problem, config)
            assert_array_equal(output, trace.iterates[-1])
            self.assertLessEqual(problem.objective(output) - optimum, (problem.objective(start) - optimum) / T)


if __name__ == '__main__':
    unittest.main()
