# -*- coding: utf-8 -*-
"""
Self-checks behind ``cgmvi validate``: oracle equivalences of the projection and direction
solvers, certificate soundness, and the boundedness, feasibility and rate guarantees of the
step-size schedules on seeded instances.
"""

import logging
import sys
import time
from collections import OrderedDict
from dataclasses import asdict, dataclass, field

import numpy as np

from cgmvi import geometry, metrics, problems, qp, solver
from cgmvi.errors import InvalidConfigError
from cgmvi.geometry import VelocityPolytope
from cgmvi.utils import oracles
from cgmvi.utils.tracewriter import write_summary

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0


def check_proj_v(cases=1000, seed=0):
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_sum = 0.0
    worst_sign = 0.0
    for _ in range(cases):
        d = int(rng.integers(1, 9))
        q, N = oracles.random_restriction(rng, d)
        p = geometry.proj_v(q, N)
        expected = oracles.brute_force_proj_v(q, N)
        worst = max(worst, float(np.max(np.abs(p - expected))))
        worst_sum = max(worst_sum, abs(float(np.sum(p)) - 1.0))
        if np.any(N):
            worst_sign = max(worst_sign, float(-np.min(p[N])))
    passed = worst <= 1e-9 and worst_sum <= 1e-12 and worst_sign <= 1e-12
    return passed, {'max_error': worst, 'max_sum_residual': worst_sum, 'max_negative': worst_sign}


def check_qp_oracle(cases=1000, seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        d = int(rng.integers(1, 9))
        k = int(rng.integers(1, 7))
        polytope, _ = oracles.random_polytope(rng, k, d)
        Fx = rng.normal(0.0, 3.0, size=d)
        result = qp.solve_direction_generic(polytope, Fx)
        expected = oracles.brute_force_direction(polytope, Fx)
        worst = max(worst, float(np.max(np.abs(result.v - expected))))
    return worst <= 1e-9, {'max_error': worst}


def check_closed_form(cases=1000, seed=2):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(cases):
        d = int(rng.integers(1, 9))
        alpha = float(rng.uniform(0.1, 10.0))
        g = float(rng.uniform(-1.0, 1.0))
        grad = rng.standard_normal(d)
        Fx = rng.normal(0.0, 3.0, size=d)
        single = qp.solve_direction_single(g, grad, Fx, alpha)
        if g >= 0:
            polytope = VelocityPolytope(normals=grad[None, :], offsets=np.array([alpha * g]), alpha=alpha)
        else:
            polytope = VelocityPolytope(normals=np.zeros((0, d)), offsets=np.zeros(0), alpha=alpha)
        generic = qp.solve_direction_generic(polytope, Fx)
        worst = max(worst, float(np.max(np.abs(single.v - generic.v))))
    return worst <= 1e-9, {'max_error': worst}


def _step_pair(problem, x, eta, alpha):
    config = solver.SolverConfig(T=1, eta=eta, alpha=alpha, averaging='last')
    direct, _ = solver.simplex_cgm_run(problem, config, x0=x)
    generic, _ = solver.cgm_run(problems.explicit_simplex(problem), config, x0=x)
    return direct, generic


def check_simplex_equivalence(cases=200, seed=3):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for case in range(cases):
        problem = problems.make_matrix_game_simplex(int(rng.integers(1, 4)), seed=case)
        x = oracles.dyadic_simplex_point(rng, problem.dim)
        direct, generic = _step_pair(problem, x, eta=float(rng.uniform(0.01, 0.5)), alpha=float(rng.uniform(0.5, 4)))
        worst = max(worst, float(np.max(np.abs(direct - generic))))
    return worst <= 1e-8, {'max_error': worst}


def _feasible_sample(rng, polytope, anchor):
    direction = rng.standard_normal(polytope.dim)
    rates = polytope.normals @ direction
    # rows binding at the anchor can report a slack of -1e-16
    slack = np.maximum(-polytope.residual(anchor), 0.0)
    limits = slack[rates > 0] / rates[rates > 0]
    reach = float(np.min(limits)) if limits.size else 10.0
    return anchor + rng.uniform(0.0, min(reach, 10.0)) * direction


def check_certificate(cases=200, samples=100, seed=4):
    rng = np.random.default_rng(seed)
    worst = np.inf
    for case in range(cases):
        d = int(rng.integers(2, 9))
        method = 'dual-pg' if case % 2 else 'active-set'
        # full row rank keeps the dual strongly convex
        k = int(rng.integers(1, d // 2 + 1)) if method == 'dual-pg' else int(rng.integers(1, 7))
        polytope, anchor = oracles.random_polytope(rng, k, d)
        Fx = rng.normal(0.0, 3.0, size=d)
        result = qp.solve_direction_generic(polytope, Fx, epsilon=1e-4, method=method)
        if np.any(result.dual < 0):
            return False, {'negative_dual': float(np.min(result.dual))}
        for _ in range(samples):
            other = _feasible_sample(rng, polytope, anchor)
            worst = min(worst, result.delta - float((result.v + Fx) @ (result.v - other)))
    return worst >= -1e-9, {'min_margin': float(worst)}


def _theorem1_runs(instances=20, T=200, gamma=1.5):
    for seed in range(1, instances + 1):
        problem = problems.make_matrix_game_quadratic(1 + seed % 4, seed=seed)
        config = solver.SolverConfig(T=T, schedule='constant', include_aux=True, init='feasible', seed=seed,
                                     gamma=gamma)
        _, trace = solver.cgm_run(problem, config)
        yield problem, trace


def check_lemma1(instances=20, T=200, gamma=1.5):
    violations = 0
    worst_x = -np.inf
    worst_v = -np.inf
    for problem, trace in _theorem1_runs(instances, T, gamma):
        x_bound, v_bound = metrics.lemma1_bounds(problem.constants.D, problem.constants.L_F, trace.alpha, gamma)
        x_margin = np.sum(trace.iterates ** 2, axis=1) - x_bound
        v_margin = np.sum(trace.velocities ** 2, axis=1) - v_bound
        violations += int(np.sum(x_margin > 1e-8) + np.sum(v_margin > 1e-8))
        worst_x = max(worst_x, float(np.max(x_margin)))
        worst_v = max(worst_v, float(np.max(v_margin)))
    return violations == 0, {'violations': violations, 'max_x_excess': worst_x, 'max_v_excess': worst_v}


def check_theorem1_feasibility(instances=20, T=200):
    violations = 0
    worst = -np.inf
    for problem, trace in _theorem1_runs(instances, T):
        bound = metrics.theory_bounds(problem.constants, T).thm1_feas_bound
        values = np.array([problem.constraint_values(x) for x in trace.iterates])
        violations += int(np.sum(values > bound))
        worst = max(worst, float(np.max(values)) - bound)
    return violations == 0, {'violations': violations, 'max_excess': worst}


def check_theorem2(T_values=(64, 256, 1024), gamma=3.0):
    problem = problems.make_affine_ball(6, seed=11, mu=1.0, skew=1.0, center=np.zeros(6))
    _, gap_fn = metrics.gap_evaluator(problem, 'ellipsoid-strong')
    gaps, within = [], True
    for T in T_values:
        config = solver.SolverConfig(T=T, schedule='inverse-t', gamma=gamma, init='feasible', seed=11)
        output, _ = solver.cgm_run(problem, config)
        gaps.append(gap_fn(output))
        within = within and gaps[-1] <= metrics.theory_bounds(problem.constants, T, gamma=gamma).thm2_gap_bound
    fit = metrics.rate_fit(T_values, gaps)
    # the violation exponent 1 - 2 / (gamma + 1) is reported only
    exponent = metrics.theory_bounds(problem.constants, T_values[-1], gamma=gamma).thm2_feas_exponent
    return within, {'gaps': gaps, 'slope': fit.slope, 'feasibility_exponent': exponent}


def check_theorem3(T_values=(64, 256)):
    problem = problems.make_ball_minimization(2.0 * np.eye(3)[0], radius=1.0)
    start = np.zeros(problem.dim)
    optimum = problem.objective(problem.reference_solution)
    excess = -np.inf
    for T in T_values:
        config = solver.SolverConfig(T=T, schedule='log-over-T', x0=start.tolist())
        output, trace = solver.cgm_run(problem, config)
        bounds = metrics.theory_bounds(problem.constants, T, initial_objective_gap=problem.objective(start) - optimum)
        excess = max(excess, problem.objective(output) - optimum - bounds.thm3_obj_bound)
        values = np.array([problem.constraint_values(x) for x in trace.iterates])
        excess = max(excess, float(np.max(values)) - bounds.thm3_feas_bound)
    return excess <= 0, {'max_excess': float(excess)}


def check_gradients():
    instances = [problems.make_forsaken(), problems.make_toy_gan(10, seed=0),
                 problems.make_matrix_game_quadratic(3, seed=0), problems.make_matrix_game_multi(2, 3, seed=0),
                 problems.make_affine_ball(4, seed=0), problems.make_ball_minimization(np.array([2.0, 0.5]))]
    errors = {problem.name: problems.check_gradients(problem) for problem in instances}
    return max(errors.values()) <= 1e-6, errors


def check_probes():
    instances = [problems.make_matrix_game_quadratic(3, seed=0), problems.make_matrix_game_simplex(3, seed=0),
                 problems.make_matrix_game_multi(2, 3, seed=0), problems.make_affine_ball(4, seed=0),
                 problems.make_ball_minimization(np.array([2.0, 0.5]))]
    detail = {}
    passed = True
    for problem in instances:
        monotone = problems.probe_monotonicity(problem)
        convex = problems.probe_convexity(problem) if problem.m else 0.0
        bounded = problems.check_boundedness(problem)
        detail[problem.name] = {'monotonicity': monotone, 'convexity': convex, 'boundedness': bounded}
        passed = passed and monotone >= 0 and convex >= 0 and bounded <= 1e-9
    return passed, detail


CHECKS = OrderedDict([
    ('proj_v', check_proj_v),
    ('qp-oracle', check_qp_oracle),
    ('closed-form', check_closed_form),
    ('simplex-equivalence', check_simplex_equivalence),
    ('certificate', check_certificate),
    ('lemma1', check_lemma1),
    ('theorem1-feasibility', check_theorem1_feasibility),
    ('theorem2', check_theorem2),
    ('theorem3', check_theorem3),
    ('gradients', check_gradients),
    ('probes', check_probes),
])


def run_checks(name_filter=None):
    """
    Run the checks whose name contains name_filter (all when None).

    :return: list of CheckResult
    """
    selected = [name for name in CHECKS if name_filter is None or name_filter in name]
    if not selected:
        raise InvalidConfigError('no check matches {0!r}, available: {1}'.format(name_filter, ', '.join(CHECKS)))
    results = []
    for name in selected:
        start = time.perf_counter()
        try:
            passed, detail = CHECKS[name]()
        except Exception as error:
            logger.exception('check %s raised', name)
            passed, detail = False, {'error': '{0}: {1}'.format(type(error).__name__, error)}
        results.append(CheckResult(name=name, passed=bool(passed), detail=detail,
                                   seconds=time.perf_counter() - start))
        logger.info('%s %s in %.2fs', 'PASS' if passed else 'FAIL', name, results[-1].seconds)
    return results


def cmd_validate(name_filter=None, report=None):
    """
    :return: exit code, 0 iff every selected check passes, 2 when the filter matches nothing
    """
    try:
        results = run_checks(name_filter)
    except InvalidConfigError as error:
        print(error, file=sys.stderr)
        return 2
    for result in results:
        print('{0} {1} {2}'.format('PASS' if result.passed else 'FAIL', result.name, result.detail))
    passed = all(result.passed for result in results)
    if report is not None:
        write_summary(report, {'passed': passed, 'checks': [asdict(result) for result in results]})
    return 0 if passed else 1
