import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), ".."))
os.environ.setdefault('MPLBACKEND', 'Agg')
import tempfile
import unittest

import numpy as np
import pandas as pd

from cgmvi import problems, solver

try:
    from cgmvi import plotting
except ImportError:
    plotting = None


@unittest.skipIf(plotting is None, "matplotlib is not installed")
class TestPlotting(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.problem = problems.make_forsaken()
        self.trajectories = {}
        self.traces = {}
        for alpha in (0.5, 8.0):
            config = solver.SolverConfig(T=16, eta=0.1, alpha=alpha, averaging='last')
            _, trace = solver.cgm_run(self.problem, config)
            self.trajectories[alpha] = trace.iterates
            frame = trace.to_frame()
            frame['gap'] = np.linalg.norm(trace.iterates[1:] - self.problem.reference_solution, axis=1)
            self.traces['alpha {0}'.format(alpha)] = frame

    def test_01_trajectories(self):
        output_file = os.path.join(self.tmp.name, 'forsaken.png')
        plotting.plot_trajectories(self.problem, self.trajectories, output_file=output_file)
        self.assertTrue(os.path.exists(output_file))

    def test_02_trajectories_from_csv(self):
        path = os.path.join(self.tmp.name, 'run_iterates.csv')
        frame = pd.DataFrame(self.trajectories[0.5], columns=['x0', 'x1'])
        frame.insert(0, 't', np.arange(len(frame)))
        frame.to_csv(path, index=False)
        output_file = os.path.join(self.tmp.name, 'from_csv.png')
        plotting.plot_trajectories(self.problem, {0.5: path}, output_file=output_file, title='forsaken')
        self.assertTrue(os.path.exists(output_file))

    def test_03_convergence(self):
        output_file = os.path.join(self.tmp.name, 'convergence.png')
        plotting.plot_convergence(self.traces, output_file=output_file, title='forsaken')
        self.assertTrue(os.path.exists(output_file))


if __name__ == '__main__':
    unittest.main()
