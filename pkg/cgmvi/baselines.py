# -*- coding: utf-8 -*-
"""
Projection-based reference solvers: projected gradient x_{t+1} = P(x_t - eta F(x_t)) for feasible
sets with a cheap exact projection, and its simplex instance, gradient descent ascent (GDA).
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from cgmvi import geometry, metrics
from cgmvi.errors import CGMError, InvalidConfigError
from cgmvi.solver import AVERAGING, TraceRecorder

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ProjectionOracle:
    tag: str
    project: Callable
    radius: Optional[float] = None

    def __call__(self, y):
        return self.project(np.asarray(y, dtype=float))


def ball_oracle(radius):
    return ProjectionOracle(tag='ball', project=lambda y: geometry.project_ball(y, radius), radius=float(radius))


def simplex_oracle():
    return ProjectionOracle(tag='simplex', project=geometry.project_simplex)


def oracle_for(problem):
    """Exact projection onto the feasible set of a ball or simplex instance."""
    if problem.structure == 'simplex':
        return simplex_oracle()
    radius = problem.data.get('ball_radius')
    if radius is not None and problem.m == 1:
        return ball_oracle(radius)
    raise InvalidConfigError('{0} has no cheap projection oracle'.format(problem.name))


def check_oracle(problem, oracle):
    if oracle.tag == 'simplex':
        if problem.structure != 'simplex':
            raise InvalidConfigError('simplex oracle used on {0}'.format(problem.name))
        return
    if oracle.tag == 'ball':
        radius = problem.data.get('ball_radius')
        if radius is None or problem.m != 1 or not np.isclose(radius, oracle.radius, rtol=1e-12, atol=0.0):
            raise InvalidConfigError('ball oracle of radius {0} does not describe {1}'
                                     .format(oracle.radius, problem.name))
        return
    raise InvalidConfigError('unknown oracle tag {0!r}'.format(oracle.tag))


def pgm_run(problem, oracle, eta, T, averaging='uniform', x0=None, seed=0, callback=None, gap_fn=None):
    """
    Projected gradient method with a trace in the same layout as the CGM trace.

    :param problem: ProblemInstance
    :param oracle: ProjectionOracle matching the feasible set
    :param eta: constant step size
    :param T: number of iterations
    :param averaging: 'uniform', 'linear-weight' or 'last'
    :param x0: start, defaults to the instance start or an N(0, 1) sample
    :param seed: seed of the start sample and of stochastic operators
    :param callback: receives a TraceEvent per iteration
    :param gap_fn: cheap gap evaluator
    :return: (output, RunTrace)
    """
    check_oracle(problem, oracle)
    if eta is None or not eta > 0:
        raise InvalidConfigError('eta must be positive, got {0!r}'.format(eta))
    if int(T) != T or T < 1:
        raise InvalidConfigError('T must be a positive integer, got {0!r}'.format(T))
    if averaging not in AVERAGING:
        raise InvalidConfigError('unknown averaging scheme {0!r}'.format(averaging))
    if x0 is None:
        x0 = problem.default_start if problem.default_start is not None \
            else np.random.default_rng(seed).standard_normal(problem.dim)
    x = np.array(x0, dtype=float)
    T = int(T)
    recorder = TraceRecorder(problem, x, T, averaging, callback, gap_fn)
    logger.info('projected gradient (%s) on %s: T=%d eta=%.4g', oracle.tag, problem.name, T, eta)
    for t in range(T):
        try:
            rng = problem.reseed(seed, t) if problem.stochastic else None
            Fx = problem.F(x, rng)
        except CGMError as error:
            error.iteration = t
            raise
        x_next = oracle(x - eta * Fx)
        v = (x_next - x) / eta
        recorder.record(t, x, v, eta, 0, 0.0, x_next, 'projection')
        x = x_next
    trace = recorder.trace(alpha=float('nan'))
    logger.info('projected gradient on %s finished: feasibility of output %.3e', problem.name,
                metrics.feasibility(problem, trace.output))
    return trace.output, trace


def gda_run(problem, eta, T, x0=None, seed=0, callback=None, gap_fn=None):
    """Projected gradient descent ascent on the joint simplex, uniformly averaged."""
    return pgm_run(problem, simplex_oracle(), eta, T, averaging='uniform', x0=x0, seed=seed,
                   callback=callback, gap_fn=gap_fn)
