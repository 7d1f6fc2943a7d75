# -*- coding: utf-8 -*-
"""
Optimality gaps, feasibility measures, empirical rate fits and the theoretical bounds.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
import pandas as pd
from scipy import linalg, stats

from cgmvi.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

GAP_KINDS = ('quadratic-closed-form', 'ellipsoid-strong', 'simplex-bound', 'distance-to-reference', 'objective')


@dataclass(frozen=True)
class GapReport:
    gap_value: float
    gap_kind: str
    feasibility: float
    iterate_kind: str = 'average'

    def to_row(self):
        return asdict(self)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    lower: float
    upper: float
    stderr: float
    rvalue: float
    max_residual: float
    n_points: int


@dataclass(frozen=True)
class TheoryBounds:
    lemma1_x_bound: Optional[float] = None
    lemma1_v_bound: Optional[float] = None
    thm1_gap_bound: Optional[float] = None
    thm1_feas_bound: Optional[float] = None
    thm2_gap_bound: Optional[float] = None
    thm2_feas_bound: Optional[float] = None
    thm2_feas_exponent: Optional[float] = None
    thm3_obj_bound: Optional[float] = None
    thm3_feas_bound: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def spd_factor(B):
    B = np.asarray(B, dtype=float)
    if B.ndim != 2 or B.shape[0] != B.shape[1] or not np.allclose(B, B.T):
        raise InvalidArgumentError('B must be a symmetric square matrix')
    try:
        return linalg.cho_factor(B)
    except linalg.LinAlgError:
        raise InvalidArgumentError('B is not positive definite')


def gap_quadratic_game(z, B, c, Fz, factor=None):
    """
    Closed-form gap sqrt(2c F^T B^{-1} F) of the quadratic-constrained game, equal to
    -min_{z in C} z^T F. The offset F(z)^T z is left out, see strong_gap_quadratic.

    :param z: evaluated point (unused by the formula, kept for a uniform signature)
    :param B: symmetric positive definite constraint matrix
    :param c: constraint level, positive
    :param Fz: operator value at z
    :param factor: optional cached Cholesky factor of B
    :return: gap value
    """
    if not c > 0:
        raise InvalidArgumentError('c must be positive, got {0!r}'.format(c))
    factor = spd_factor(B) if factor is None else factor
    Fz = np.asarray(Fz, dtype=float)
    return float(np.sqrt(max(0.0, 2.0 * c * float(Fz @ linalg.cho_solve(factor, Fz)))))


def strong_gap_quadratic(z, B, c, Fz, factor=None):
    """max_{z' in C} F(z)^T (z - z') over the ellipsoid (1/2) z'^T B z' <= c."""
    return float(np.asarray(Fz, dtype=float) @ np.asarray(z, dtype=float)) + gap_quadratic_game(z, B, c, Fz, factor)


def gap_simplex_game(x, y, A):
    return float(abs(np.max(A.T @ x)) + abs(np.min(A @ y)))


def distance_to_reference(x, reference):
    return float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(reference, dtype=float)))


def objective_gap(problem, x):
    if problem.objective is None or problem.reference_solution is None:
        raise InvalidArgumentError('{0} has no objective with a known minimizer'.format(problem.name))
    return float(problem.objective(x) - problem.objective(problem.reference_solution))


def feasibility(problem, x):
    """Largest constraint violation, nonnegative; simplex instances add the sum residual."""
    x = np.asarray(x, dtype=float)
    if problem.structure == 'simplex':
        return float(max(0.0, np.max(-x), abs(np.sum(x) - 1.0)))
    return float(max(0.0, np.max(problem.constraint_values(x))))


def default_gap_kind(problem):
    if problem.structure == 'simplex':
        return 'simplex-bound'
    if problem.objective is not None and problem.reference_solution is not None:
        return 'objective'
    if 'Bs' in problem.data:
        return 'ellipsoid-strong'
    if 'A' in problem.data and 'B' in problem.data:
        return 'quadratic-closed-form'
    if 'B' in problem.data:
        return 'ellipsoid-strong'
    if problem.reference_solution is not None:
        return 'distance-to-reference'
    return None


def gap_evaluator(problem, kind=None):
    """
    Gap function x -> scalar for per-iteration use, with matrix factorizations cached.
    Over an intersection of ellipsoids the strong gap is bounded by the smallest per-ellipsoid value.
    """
    kind = default_gap_kind(problem) if kind is None else kind
    if kind not in GAP_KINDS:
        raise InvalidArgumentError('unknown gap kind {0!r} for {1}'.format(kind, problem.name))
    data = problem.data
    if kind == 'quadratic-closed-form':
        if 'B' not in data:
            raise InvalidArgumentError('{0} has no quadratic constraint data'.format(problem.name))
        factor = spd_factor(data['B'])
        return kind, lambda x: gap_quadratic_game(x, data['B'], data['c'], problem.mean_F(x), factor)
    if kind == 'ellipsoid-strong':
        if 'Bs' in data:
            pairs = [(B, c, spd_factor(B)) for B, c in zip(data['Bs'], data['cs'])]
        elif 'B' in data:
            pairs = [(data['B'], data['c'], spd_factor(data['B']))]
        else:
            raise InvalidArgumentError('{0} has no ellipsoid data'.format(problem.name))

        def strong(x):
            Fx = problem.mean_F(x)
            return min(strong_gap_quadratic(x, B, c, Fx, factor) for B, c, factor in pairs)
        return kind, strong
    if kind == 'simplex-bound':
        if 'A' not in data:
            raise InvalidArgumentError('{0} has no payoff matrix'.format(problem.name))
        d = data['A'].shape[0]
        return kind, lambda x: gap_simplex_game(x[:d], x[d:], data['A'])
    if kind == 'objective':
        objective_gap(problem, problem.reference_solution)
        return kind, lambda x: objective_gap(problem, x)
    if problem.reference_solution is None:
        raise InvalidArgumentError('{0} has no reference solution'.format(problem.name))
    return kind, lambda x: distance_to_reference(x, problem.reference_solution)


def evaluate_gap(problem, x, kind=None, iterate_kind='average'):
    kind, gap = gap_evaluator(problem, kind)
    return GapReport(gap_value=gap(np.asarray(x, dtype=float)), gap_kind=kind,
                     feasibility=feasibility(problem, x), iterate_kind=iterate_kind)


def rate_fit(T_values, gaps, confidence=0.95):
    """
    Least-squares slope of log(gap) against log(T) with a Student-t confidence interval.

    :param T_values: horizons, at least three
    :param gaps: positive gap values
    :param confidence: coverage of the slope interval
    :return: RateFit
    """
    T_values = np.asarray(T_values, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    if T_values.size < 3 or T_values.size != gaps.size:
        raise InvalidArgumentError('rate fit needs at least three (T, gap) pairs')
    if np.any(gaps <= 0) or np.any(T_values <= 0):
        raise InvalidArgumentError('rate fit needs positive horizons and gaps')
    log_T = np.log(T_values)
    log_gap = np.log(gaps)
    fit = stats.linregress(log_T, log_gap)
    half_width = stats.t.ppf(0.5 * (1.0 + confidence), T_values.size - 2) * fit.stderr
    residuals = log_gap - (fit.intercept + fit.slope * log_T)
    return RateFit(slope=float(fit.slope), intercept=float(fit.intercept), lower=float(fit.slope - half_width),
                   upper=float(fit.slope + half_width), stderr=float(fit.stderr), rvalue=float(fit.rvalue),
                   max_residual=float(np.max(np.abs(residuals))), n_points=int(T_values.size))


def zeta(p, terms=10 ** 6):
    """Partial sum of n^-p plus the midpoint of the integral bounds on the tail."""
    if not p > 1:
        raise InvalidArgumentError('zeta needs p > 1, got {0!r}'.format(p))
    n = np.arange(terms, 0, -1, dtype=float)
    partial = float(np.sum(n ** -p))
    upper = terms ** (1.0 - p) / (p - 1.0)
    lower = (terms + 1.0) ** (1.0 - p) / (p - 1.0)
    return partial + 0.5 * (upper + lower)


def lemma1_bounds(D, L_F, alpha, gamma):
    """Squared norm bounds on iterates and velocities."""
    radius = D + 4.0 * L_F / alpha
    x_bound = gamma * D ** 2 + gamma * (gamma - 1.0) * radius ** 2
    v_bound = (gamma + 1.0) * alpha ** 2 * D ** 2 + gamma * (gamma + 1.0) * alpha ** 2 * radius ** 2
    return x_bound, v_bound


def theory_bounds(constants, T, alpha=None, gamma=1.5, epsilon=0.0, initial_objective_gap=None):
    """
    Evaluate every bound the available constants allow; missing inputs leave the bound unset.

    :param constants: ProblemConstants
    :param T: horizon
    :param alpha: polytope parameter of the run (Lemma 1)
    :param gamma: Lemma 1 / strongly-monotone parameter, > 1
    :param epsilon: QP inexactness budget
    :param initial_objective_gap: f(x_0) - f(x*) for the convex minimization bound
    :return: TheoryBounds
    """
    if not gamma > 1:
        raise InvalidArgumentError('gamma must exceed 1, got {0!r}'.format(gamma))
    D, L_F, L_g, ell_g, mu = constants.D, constants.L_F, constants.L_g, constants.ell_g, constants.mu
    bounds = {}
    if alpha is not None and L_F is not None:
        bounds['lemma1_x_bound'], bounds['lemma1_v_bound'] = lemma1_bounds(D, L_F, alpha, gamma)
    if L_F is not None:
        bounds['thm1_gap_bound'] = 10.0 * np.sqrt(2.0) * L_F * D / np.sqrt(T) + 0.5 * epsilon
    if L_g is not None and ell_g is not None:
        bounds['thm1_feas_bound'] = np.sqrt(2.0) * D * max(L_g, 5.0 * ell_g * D) / np.sqrt(T)
    if mu and mu > 0 and L_F is not None and T >= 2:
        M = 2.0 * (gamma + 1.0) * (D + 2.0 * L_F / mu)
        bounds['thm2_gap_bound'] = mu * M ** 2 / (T - 1.0) + 0.5 * epsilon
        exponent = 1.0 - 2.0 / (gamma + 1.0)
        bounds['thm2_feas_exponent'] = exponent
        if L_g is not None and ell_g is not None:
            numerator = max(12.0 * M * L_g, 6.0 * ell_g * M ** 2) \
                + 6.0 * ell_g * M ** 2 * zeta(1.0 + 2.0 / (gamma + 1.0))
            bounds['thm2_feas_bound'] = numerator / (T + 1.0) ** exponent
    if mu and mu > 0 and constants.L_f is not None:
        if initial_objective_gap is not None:
            bounds['thm3_obj_bound'] = initial_objective_gap / T
        if L_g is not None and ell_g is not None:
            M = 3.0 * (D + 4.0 * constants.L_f / mu)
            bounds['thm3_feas_bound'] = M * max(2.0 * L_g, ell_g * M) * np.log(T) / (2.0 * T)
    return TheoryBounds(**{key: float(value) for key, value in bounds.items()})


def summarize_run(run_id, problem, trace, report, wall_time=None):
    """
    One-row summary of a finished run.

    :param run_id: label of the run
    :param problem: ProblemInstance
    :param trace: RunTrace
    :param report: GapReport of the output point
    :param wall_time: seconds spent in the solver
    :return: DataFrame
    """
    run_data = {'run': run_id,
                'problem': problem.name,
                'dim': problem.dim,
                'T': trace.T,
                'alpha': trace.alpha,
                'averaging': trace.averaging,
                'gap_kind': report.gap_kind,
                'final_gap': report.gap_value,
                'final_feasibility': report.feasibility,
                'max_feasibility': float(np.max(trace.feasibilities)),
                'max_active': int(np.max(trace.active_counts)) if trace.T else 0,
                'max_delta': float(np.max(trace.deltas)) if trace.T else 0.0,
                'wall_time': wall_time}
    return pd.DataFrame([run_data])
