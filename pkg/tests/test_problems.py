import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

from cgmvi import problems
from cgmvi.errors import InvalidArgumentError


class TestGenerators(unittest.TestCase):

    def test_01_forsaken(self):
        problem = problems.make_forsaken()
        self.assertEqual(problem.dim, 2)
        self.assertFalse(problem.monotone)
        assert_allclose(problem.default_start, [0.5, 1.0])
        self.assertLess(np.linalg.norm(problem.F(problem.reference_solution)), 1e-8)
        self.assertTrue(problem.is_feasible(problem.reference_solution))
        self.assertTrue(problem.constants.empirical)

    def test_02_toy_gan_needs_a_generator(self):
        problem = problems.make_toy_gan(sample_count=50, seed=2)
        with self.assertRaises(InvalidArgumentError):
            problem.F(np.array([0.5, 0.5]))
        assert_allclose(problem.mean_F(problem.reference_solution), [0.0, 0.0], atol=1e-15)

    def test_03_toy_gan_reseed_is_reproducible(self):
        problem = problems.make_toy_gan(sample_count=50, seed=2)
        x = np.array([0.3, -0.2])
        assert_array_equal(problem.F(x, problem.reseed(4, 9)), problem.F(x, problem.reseed(4, 9)))
        self.assertFalse(np.array_equal(problem.F(x, problem.reseed(4, 9)), problem.F(x, problem.reseed(4, 10))))

    def test_04_toy_gan_sample_count(self):
        with self.assertRaises(InvalidArgumentError):
            problems.make_toy_gan(sample_count=0)

    def test_05_quadratic_game(self):
        problem = problems.make_matrix_game_quadratic(3, seed=5)
        self.assertEqual(problem.dim, 6)
        self.assertEqual(problem.structure, 'single-constraint')
        B = problem.data['B']
        assert_allclose(B, B.T)
        self.assertGreater(np.linalg.eigvalsh(B).min(), 0.0)
        self.assertTrue(problem.is_feasible(np.zeros(6)))
        self.assertFalse(problem.constants.empirical)
        self.assertLessEqual(problems.check_boundedness(problem), 1e-9)

    def test_06_same_seed_same_instance(self):
        first = problems.make_matrix_game_quadratic(2, seed=9)
        second = problems.make_matrix_game_quadratic(2, seed=9)
        assert_array_equal(first.data['A'], second.data['A'])
        assert_array_equal(first.data['B'], second.data['B'])

    def test_07_simplex_game(self):
        problem = problems.make_matrix_game_simplex(3, seed=0)
        self.assertEqual(problem.m, 0)
        self.assertTrue(problem.is_feasible(np.ones(6) / 6.0, tol=1e-12))
        self.assertFalse(problem.is_feasible(np.ones(6)))

    def test_08_explicit_simplex(self):
        problem = problems.explicit_simplex(problems.make_matrix_game_simplex(2, seed=0))
        self.assertEqual(problem.m, 2 + 4)
        self.assertEqual(problem.structure, 'generic')
        assert_allclose(problem.constraint_values(np.ones(4) / 4.0), [0.0, 0.0, -0.25, -0.25, -0.25, -0.25])
        with self.assertRaises(InvalidArgumentError):
            problems.explicit_simplex(problems.make_forsaken())

    def test_09_multi_game(self):
        problem = problems.make_matrix_game_multi(2, m=4, seed=3)
        self.assertEqual(problem.m, 4)
        self.assertEqual(len(problem.data['Bs']), 4)
        self.assertLessEqual(problems.check_boundedness(problem), 1e-9)

    def test_10_affine_ball(self):
        problem = problems.make_affine_ball(4, seed=1, mu=1.0, skew=1.0)
        center = problem.reference_solution
        self.assertAlmostEqual(np.linalg.norm(center), 0.5)
        assert_allclose(problem.F(center), np.zeros(4), atol=1e-15)
        self.assertGreaterEqual(problems.probe_monotonicity(problem), 0.0)

    def test_11_constant_operator_on_a_ball(self):
        problem = problems.make_affine_ball(3, seed=0, mu=0.0, skew=0.0, center=np.zeros(3), shift=[0.0, 2.0, 0.0])
        assert_allclose(problem.reference_solution, [0.0, -1.0, 0.0])
        assert_allclose(problem.F(np.ones(3)), [0.0, 2.0, 0.0])
        self.assertAlmostEqual(problem.constants.L_F, 2.0)

    def test_12_ball_minimization(self):
        problem = problems.make_ball_minimization(np.array([2.0, 0.0, 0.0]))
        assert_allclose(problem.reference_solution, [1.0, 0.0, 0.0])
        self.assertAlmostEqual(problem.objective(problem.reference_solution), 0.5)
        self.assertEqual(problem.constants.mu, 1.0)
        inside = problems.make_ball_minimization(np.array([0.2, 0.1]))
        assert_allclose(inside.reference_solution, [0.2, 0.1])

    def test_13_invalid_instances(self):
        constants = problems.ProblemConstants(D=1.0)
        with self.assertRaises(InvalidArgumentError):
            problems.ProblemInstance(name='x', dim=0, operator=lambda x: x, constraints=(), constants=constants,
                                     structure='simplex')
        with self.assertRaises(InvalidArgumentError):
            problems.ProblemInstance(name='x', dim=2, operator=lambda x: x, constraints=(), constants=constants)
        with self.assertRaises(InvalidArgumentError):
            problems.make_matrix_game_quadratic(0)
        with self.assertRaises(InvalidArgumentError):
            problems.make_matrix_game_multi(2, m=0)

    def test_14_descriptor(self):
        descriptor = problems.make_matrix_game_quadratic(2, seed=3).descriptor()
        self.assertEqual(descriptor['generator'], 'quadratic-game')
        self.assertEqual(descriptor['params'], {'d': 2, 'seed': 3})
        self.assertFalse(descriptor['aggregate'])
        self.assertIn('L_F', descriptor['constants'])


class TestProbes(unittest.TestCase):

    def test_01_gradients(self):
        for problem in (problems.make_forsaken(), problems.make_toy_gan(10), problems.make_matrix_game_quadratic(2),
                        problems.make_affine_ball(3), problems.make_ball_minimization(np.array([2.0, 1.0]))):
            self.assertLess(problems.check_gradients(problem), 1e-6, problem.name)

    def test_02_wrong_gradient_is_detected(self):
        problem = problems.make_ball_minimization(np.array([2.0, 1.0]))
        broken = problems.Constraint(value=problem.constraints[0].value, gradient=lambda x: 2.0 * x)
        problem = problems.ProblemInstance(name='broken', dim=2, operator=problem.operator, constraints=(broken,),
                                           constants=problem.constants)
        self.assertGreater(problems.check_gradients(problem), 1e-3)

    def test_03_monotonicity(self):
        self.assertGreaterEqual(problems.probe_monotonicity(problems.make_matrix_game_quadratic(3, seed=1)), 0.0)
        expanding = problems.ProblemInstance(name='expanding', dim=2, operator=lambda x: -x,
                                             constraints=problems.make_affine_ball(2).constraints,
                                             constants=problems.ProblemConstants(D=1.0))
        self.assertLess(problems.probe_monotonicity(expanding), 0.0)

    def test_04_convexity(self):
        self.assertGreaterEqual(problems.probe_convexity(problems.make_matrix_game_multi(2, seed=0)), 0.0)
        concave = problems.Constraint(value=lambda x: -float(x @ x), gradient=lambda x: -2.0 * x)
        problem = problems.ProblemInstance(name='concave', dim=2, operator=lambda x: x, constraints=(concave,),
                                           constants=problems.ProblemConstants(D=1.0))
        self.assertLess(problems.probe_convexity(problem), 0.0)

    def test_05_boundedness_detects_a_small_radius(self):
        problem = problems.make_affine_ball(3, seed=0).with_constants(D=0.5)
        self.assertGreater(problems.check_boundedness(problem), 0.0)

    def test_06_estimated_constants(self):
        problem = problems.make_forsaken()
        constants = problems.estimate_constants(problem.operator, problem.constraints, 2, 1.0, n_samples=2000)
        self.assertGreater(constants.L_F, 0.0)
        self.assertGreater(constants.L_g, 0.0)
        self.assertGreater(constants.ell_g, 0.0)


if __name__ == '__main__':
    unittest.main()
