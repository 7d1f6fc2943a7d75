import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))
import io
import tempfile
import unittest
from contextlib import redirect_stdout
from unittest import mock

import numpy as np

from cgmvi import qp, validation
from cgmvi.errors import InvalidConfigError
from cgmvi.geometry import VelocityPolytope
from cgmvi.utils.tracewriter import read_summary


def unclamped(g, grad_g, Fx, alpha):
    """Single-constraint solve that forgets the sign condition on the multiplier."""
    grad_g = np.asarray(grad_g, dtype=float)
    Fx = np.asarray(Fx, dtype=float)
    if g < 0:
        return qp.DirectionResult(v=-Fx, dual=np.zeros(0), delta=0.0, solver_tag='closed-form')
    multiplier = (alpha * g - grad_g @ Fx) / float(grad_g @ grad_g)
    return qp.DirectionResult(v=-Fx - multiplier * grad_g, dual=np.array([multiplier]), delta=0.0,
                              solver_tag='closed-form')


class TestChecks(unittest.TestCase):

    def test_01_oracle_checks(self):
        for check, kwargs in ((validation.check_proj_v, {'cases': 100}),
                              (validation.check_qp_oracle, {'cases': 100}),
                              (validation.check_closed_form, {'cases': 100}),
                              (validation.check_simplex_equivalence, {'cases': 30}),
                              (validation.check_certificate, {'cases': 20, 'samples': 20})):
            passed, detail = check(**kwargs)
            self.assertTrue(passed, '{0}: {1}'.format(check.__name__, detail))

    def test_02_schedule_checks(self):
        for check, kwargs in ((validation.check_lemma1, {'instances': 3}),
                              (validation.check_theorem1_feasibility, {'instances': 3}),
                              (validation.check_theorem3, {})):
            passed, detail = check(**kwargs)
            self.assertTrue(passed, '{0}: {1}'.format(check.__name__, detail))

    def test_03_instance_checks(self):
        for check in (validation.check_gradients, validation.check_probes):
            passed, detail = check()
            self.assertTrue(passed, '{0}: {1}'.format(check.__name__, detail))

    def test_04_broken_solver_is_caught(self):
        with mock.patch('cgmvi.qp.solve_direction_single', unclamped):
            passed, detail = validation.check_closed_form(cases=50)
        self.assertFalse(passed)
        self.assertGreater(detail['max_error'], 1e-9)

    def test_05_certificate_with_default_arguments(self):
        passed, detail = validation.check_certificate()
        self.assertTrue(passed, detail)

    def test_06_sample_at_a_binding_row(self):
        rng = np.random.default_rng(0)
        polytope = VelocityPolytope(normals=np.array([[1.0, 0.0], [0.0, 1.0]]), offsets=np.array([-0.1, -1.0]),
                                    alpha=1.0)
        # the first row binds up to rounding
        anchor = np.array([0.1 + 1e-16, 0.0])
        for _ in range(50):
            sample = validation._feasible_sample(rng, polytope, anchor)
            self.assertTrue(polytope.contains(sample))


class TestRunChecks(unittest.TestCase):

    def test_01_filter(self):
        results = validation.run_checks('proj_v')
        self.assertEqual([result.name for result in results], ['proj_v'])
        self.assertTrue(results[0].passed)
        with self.assertRaises(InvalidConfigError):
            validation.run_checks('no-such-check')

    def test_02_exceptions_fail_the_check(self):
        with mock.patch.dict(validation.CHECKS, {'proj_v': mock.Mock(side_effect=RuntimeError('boom'))}):
            with self.assertLogs('cgmvi.validation', level='ERROR'):
                results = validation.run_checks('proj_v')
        self.assertFalse(results[0].passed)
        self.assertIn('boom', results[0].detail['error'])

    def test_03_report(self):
        with tempfile.TemporaryDirectory() as directory:
            report = os.path.join(directory, 'report.json')
            with redirect_stdout(io.StringIO()) as stdout:
                code = validation.cmd_validate('proj_v', report)
            self.assertEqual(code, 0)
            self.assertIn('PASS proj_v', stdout.getvalue())
            document = read_summary(report)
            self.assertTrue(document['passed'])
            self.assertEqual(document['checks'][0]['name'], 'proj_v')

    def test_04_unknown_filter_exits_with_2(self):
        with mock.patch('sys.stderr', new_callable=io.StringIO):
            self.assertEqual(validation.cmd_validate('nope'), 2)


if __name__ == '__main__':
    unittest.main()
