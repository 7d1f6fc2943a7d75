import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))
import unittest

import numpy as np
from numpy.testing import assert_allclose

from cgmvi import baselines, metrics, problems
from cgmvi.errors import InvalidConfigError


class TestOracles(unittest.TestCase):

    def test_01_oracle_for(self):
        self.assertEqual(baselines.oracle_for(problems.make_matrix_game_simplex(2)).tag, 'simplex')
        oracle = baselines.oracle_for(problems.make_ball_minimization(np.array([2.0, 0.0]), radius=2.0))
        self.assertEqual(oracle.tag, 'ball')
        assert_allclose(oracle([0.0, 4.0]), [0.0, 2.0])
        with self.assertRaises(InvalidConfigError):
            baselines.oracle_for(problems.make_matrix_game_quadratic(2))

    def test_02_mismatched_oracle(self):
        ball = problems.make_affine_ball(3, radius=1.0)
        with self.assertRaises(InvalidConfigError):
            baselines.check_oracle(ball, baselines.ball_oracle(2.0))
        with self.assertRaises(InvalidConfigError):
            baselines.check_oracle(ball, baselines.simplex_oracle())
        with self.assertRaises(InvalidConfigError):
            baselines.check_oracle(problems.make_matrix_game_simplex(2), baselines.ball_oracle(1.0))
        baselines.check_oracle(ball, baselines.ball_oracle(1.0))


class TestProjectedGradient(unittest.TestCase):

    def test_01_ball_minimization(self):
        problem = problems.make_ball_minimization(np.array([2.0, 0.0, 0.0]))
        output, trace = baselines.pgm_run(problem, baselines.oracle_for(problem), eta=0.5, T=50, averaging='last',
                                          x0=[3.0, 0.0, 0.0])
        self.assertTrue(np.all(np.linalg.norm(trace.iterates[1:], axis=1) <= 1.0 + 1e-12))
        assert_allclose(output, problem.reference_solution, atol=1e-12)
        self.assertTrue(np.isnan(trace.alpha))
        self.assertEqual(trace.solver_tags, {'projection': 50})

    def test_02_gda_stays_on_the_simplex(self):
        problem = problems.make_matrix_game_simplex(3, seed=1)
        _, gap_fn = metrics.gap_evaluator(problem)
        output, trace = baselines.gda_run(problem, eta=0.05, T=40, seed=2, gap_fn=gap_fn)
        assert_allclose(trace.iterates[1:].sum(axis=1), 1.0)
        self.assertTrue(np.all(trace.iterates[1:] >= 0))
        self.assertEqual(trace.averaging, 'uniform')
        self.assertLess(trace.replay_error(), 1e-12)
        self.assertAlmostEqual(trace.gaps[-1], gap_fn(output))

    def test_03_invalid_arguments(self):
        problem = problems.make_matrix_game_simplex(2)
        with self.assertRaises(InvalidConfigError):
            baselines.gda_run(problem, eta=-0.1, T=10)
        with self.assertRaises(InvalidConfigError):
            baselines.gda_run(problem, eta=0.1, T=0)
        with self.assertRaises(InvalidConfigError):
            baselines.pgm_run(problem, baselines.simplex_oracle(), eta=0.1, T=10, averaging='median')


if __name__ == '__main__':
    unittest.main()
