# -*- coding: utf-8 -*-
"""
Direction subproblem min_{v in V} (1/2)||v + F(x)||^2 over a velocity polytope.

Every solver returns a DirectionResult whose certificate delta = -lambda^T (b + G v)
bounds sup_{v' in V} (v + F)^T (v - v') whenever v + F + G^T lambda = 0.
"""

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy import optimize, special

from cgmvi.errors import (InfeasibleLinearizationError, InfeasibleSubproblemError, InvalidArgumentError,
                          MaxIterationsError)
from cgmvi.problems import Constraint

logger = logging.getLogger(__name__)

METHODS = ('active-set', 'dual-pg', 'frank-wolfe')
MAX_DUAL_SWEEPS = 100000


@dataclass(frozen=True, eq=False)
class DirectionResult:
    v: np.ndarray
    dual: np.ndarray
    delta: float
    solver_tag: str
    iterations: int = 0


def _tolerance(polytope, Fx):
    return 1e-9 * (1.0 + np.linalg.norm(Fx) + np.linalg.norm(polytope.offsets))


def certificate(polytope, v, dual):
    """Complementary slackness residual -lambda^T (b + G v)."""
    if polytope.k == 0:
        return 0.0
    return float(-dual @ polytope.residual(v))


def solve_direction_single(g, grad_g, Fx, alpha):
    """
    Closed-form solution for one constraint.

    :param g: constraint value g(x)
    :param grad_g: constraint gradient at x
    :param Fx: operator value F(x)
    :param alpha: polytope parameter
    :return: DirectionResult with an exact (zero) certificate
    """
    if not alpha > 0:
        raise InvalidArgumentError('alpha must be positive, got {0!r}'.format(alpha))
    grad_g = np.asarray(grad_g, dtype=float)
    Fx = np.asarray(Fx, dtype=float)
    if g < 0:
        return DirectionResult(v=-Fx, dual=np.zeros(0), delta=0.0, solver_tag='closed-form')
    norm_sq = float(grad_g @ grad_g)
    if norm_sq == 0:
        raise InfeasibleLinearizationError('active constraint with zero gradient (g={0:.3e})'.format(g))
    multiplier = max(0.0, (alpha * g - grad_g @ Fx) / norm_sq)
    return DirectionResult(v=-Fx - multiplier * grad_g, dual=np.array([multiplier]), delta=0.0,
                           solver_tag='closed-form')


def _unconstrained(Fx):
    return DirectionResult(v=-np.asarray(Fx, dtype=float), dual=np.zeros(0), delta=0.0, solver_tag='closed-form')


def is_feasible_polytope(polytope, bound=None):
    """Feasibility LP of G v <= -b, optionally within the box |v_i| <= bound."""
    if polytope.k == 0:
        return True
    bounds = [(None, None) if bound is None else (-bound, bound)] * polytope.dim
    result = optimize.linprog(np.zeros(polytope.dim), A_ub=polytope.normals, b_ub=-polytope.offsets,
                              bounds=bounds, method='highs')
    return result.status == 0


def _active_set(polytope, Fx, tol, max_pivots):
    """
    Dual active-set method for a unit Hessian: start from the unconstrained minimizer, add the
    most violated row, and move along the null space of the working normals, dropping rows whose
    multiplier would turn negative. Working-set solves are least-squares (min-norm) KKT solves.
    """
    G = polytope.normals
    b = polytope.offsets
    k, d = G.shape
    v = -Fx.copy()
    dual = np.zeros(k)
    working = []
    skipped = set()
    pivots = 0
    while True:
        residual = G @ v + b
        candidates = [i for i in range(k) if i not in working and i not in skipped]
        if not candidates:
            break
        p = max(candidates, key=lambda i: residual[i])
        if residual[p] <= tol:
            break
        n_p = G[p]
        while True:
            pivots += 1
            if pivots > max_pivots:
                raise MaxIterationsError('active-set method exceeded {0} pivots'.format(max_pivots),
                                         v=v, delta=certificate(polytope, v, dual))
            if working:
                N = G[working].T
                r = np.linalg.lstsq(N, n_p, rcond=None)[0]
                z = -(n_p - N @ r)
            else:
                r = np.zeros(0)
                z = -n_p
            # multipliers of the working rows change by -t r per unit step on row p
            partial_step, leaving = np.inf, None
            for j, idx in enumerate(working):
                if r[j] > 0:
                    ratio = dual[idx] / r[j]
                    if ratio < partial_step:
                        partial_step, leaving = ratio, j
            violation = float(n_p @ v + b[p])
            curvature = float(-n_p @ z)
            full_step = violation / curvature if curvature > tol * max(1.0, float(n_p @ n_p)) else np.inf
            step = min(partial_step, full_step)
            if not np.isfinite(step):
                if is_feasible_polytope(polytope):
                    # numerically dependent row already implied by the working set
                    logger.debug('skipping dependent row %d', p)
                    skipped.add(p)
                    break
                certificate_rows = np.zeros(k)
                certificate_rows[p] = 1.0
                certificate_rows[working] = -r
                raise InfeasibleSubproblemError('velocity polytope is empty', certificate=certificate_rows)
            if np.isfinite(full_step):
                v = v + step * z
            for j, idx in enumerate(working):
                dual[idx] -= step * r[j]
            dual[p] += step
            if step == full_step:
                working.append(p)
                break
            idx = working.pop(leaving)
            dual[idx] = 0.0
            # a drop changes the span of the working normals
            skipped.clear()
    np.maximum(dual, 0.0, out=dual)
    return v, dual, pivots


def _dual_projected_gradient(polytope, Fx, epsilon, tol, dual=None, max_sweeps=MAX_DUAL_SWEEPS):
    """
    Accelerated projected gradient on min_{lambda >= 0} (1/2) lambda^T G G^T lambda + lambda^T (G F - b)
    with step 1/||G G^T||_2 and adaptive restart.
    """
    G = polytope.normals
    b = polytope.offsets
    H = G @ G.T
    linear = G @ Fx - b
    step = 1.0 / max(np.linalg.norm(H, 2), np.finfo(float).tiny)
    dual = np.zeros(polytope.k) if dual is None else dual.copy()
    momentum = dual.copy()
    theta = 1.0
    v = -Fx - G.T @ dual
    delta = certificate(polytope, v, dual)
    for sweep in range(1, max_sweeps + 1):
        updated = np.maximum(momentum - step * (H @ momentum + linear), 0.0)
        theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta ** 2))
        if (updated - dual) @ (momentum - updated) > 0:
            theta_next = 1.0
            momentum = updated.copy()
        else:
            momentum = updated + ((theta - 1.0) / theta_next) * (updated - dual)
        dual, theta = updated, theta_next
        v = -Fx - G.T @ dual
        delta = certificate(polytope, v, dual)
        if np.max(polytope.residual(v)) <= tol and delta <= 0.5 * epsilon + tol:
            return v, dual, sweep
    raise MaxIterationsError('dual projected gradient exceeded {0} sweeps'.format(max_sweeps), v=v, delta=delta)


def solve_direction_frank_wolfe(polytope, Fx, epsilon, bound, max_iterations=10000):
    """
    Frank-Wolfe on the polytope truncated to the box |v_i| <= bound, one linprog call per step.
    The certificate is the Frank-Wolfe gap over the truncated polytope.
    """
    Fx = np.asarray(Fx, dtype=float)
    if polytope.k == 0 and np.max(np.abs(Fx)) <= bound:
        return _unconstrained(Fx)
    tol = 1e-9 * (1.0 + np.linalg.norm(Fx))
    bounds = [(-bound, bound)] * polytope.dim
    A_ub = polytope.normals if polytope.k else None
    b_ub = -polytope.offsets if polytope.k else None
    start = optimize.linprog(np.zeros(polytope.dim), A_ub=A_ub, b_ub=b_ub, bounds=bounds, method='highs')
    if start.status != 0:
        raise InfeasibleSubproblemError('truncated velocity polytope is empty (bound {0:.3e})'.format(bound))
    v = start.x
    gap = np.inf
    for iteration in range(1, max_iterations + 1):
        grad = v + Fx
        vertex = optimize.linprog(grad, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method='highs').x
        direction = vertex - v
        gap = float(-grad @ direction)
        if gap <= 0.5 * epsilon + tol:
            break
        gamma = min(1.0, gap / float(direction @ direction))
        v = v + gamma * direction
    else:
        raise MaxIterationsError('Frank-Wolfe exceeded {0} iterations'.format(max_iterations), v=v, delta=gap)
    dual = np.zeros(polytope.k)
    if polytope.k:
        near = polytope.residual(v) >= -max(np.sqrt(epsilon), 1e-6)
        if np.any(near):
            dual[near] = optimize.nnls(polytope.normals[near].T, -(v + Fx))[0]
    return DirectionResult(v=v, dual=dual, delta=max(gap, 0.0), solver_tag='frank-wolfe', iterations=iteration)


def solve_direction_generic(polytope, Fx, epsilon=1e-8, method='active-set', fallback_threshold=50,
                            velocity_bound=None):
    """
    Solve the direction QP over an arbitrary velocity polytope.

    :param polytope: VelocityPolytope with nonzero rows
    :param Fx: operator value F(x)
    :param epsilon: inexactness budget, the returned certificate is at most epsilon / 2 (up to rounding)
    :param method: 'active-set', 'dual-pg' or 'frank-wolfe'
    :param fallback_threshold: row count above which the active-set method hands over to dual-pg
    :param velocity_bound: box radius for frank-wolfe
    :return: DirectionResult
    """
    if not epsilon >= 0:
        raise InvalidArgumentError('epsilon must be nonnegative, got {0!r}'.format(epsilon))
    if method not in METHODS:
        raise InvalidArgumentError('unknown QP method {0!r}'.format(method))
    Fx = np.asarray(Fx, dtype=float)
    if polytope.k == 0:
        return _unconstrained(Fx)
    tol = _tolerance(polytope, Fx)
    if method == 'frank-wolfe':
        bound = velocity_bound if velocity_bound is not None else 1e3 * (1.0 + np.linalg.norm(Fx))
        return solve_direction_frank_wolfe(polytope, Fx, epsilon, bound)
    if method == 'dual-pg' or polytope.k > fallback_threshold:
        v, dual, sweeps = _dual_projected_gradient(polytope, Fx, epsilon, tol)
        return DirectionResult(v=v, dual=dual, delta=certificate(polytope, v, dual), solver_tag='dual-pg',
                               iterations=sweeps)
    v, dual, pivots = _active_set(polytope, Fx, tol, max_pivots=10 * polytope.k)
    delta = certificate(polytope, v, dual)
    if delta > 0.5 * epsilon + tol or np.max(polytope.residual(v)) > tol:
        logger.debug('active-set certificate %.3e above budget, polishing', delta)
        v, dual, sweeps = _dual_projected_gradient(polytope, Fx, epsilon, tol, dual=dual)
        return DirectionResult(v=v, dual=dual, delta=certificate(polytope, v, dual), solver_tag='dual-pg',
                               iterations=pivots + sweeps)
    return DirectionResult(v=v, dual=dual, delta=delta, solver_tag='active-set', iterations=pivots)


def logsumexp_aggregate(constraints):
    """
    Single smooth constraint log(sum_i exp(g_i(x))) >= max_i g_i(x) with softmax-weighted gradient.
    """
    constraints = tuple(constraints)
    if not constraints:
        raise InvalidArgumentError('log-sum-exp aggregation needs at least one constraint')

    def value(x):
        return float(special.logsumexp([c.value(x) for c in constraints]))

    def gradient(x):
        weights = special.softmax([c.value(x) for c in constraints])
        return sum(w * np.asarray(c.gradient(x), dtype=float) for w, c in zip(weights, constraints))

    return Constraint(value=value, gradient=gradient, name='logsumexp')


def aggregate_constraints(problem):
    """Single-constraint instance whose feasible set is inside the original one."""
    if problem.structure == 'simplex':
        raise InvalidArgumentError('simplex instances keep their native constraint handling')
    constants = problem.constants
    ell_g = None
    if constants.ell_g is not None and constants.L_g is not None:
        ell_g = constants.ell_g + constants.L_g ** 2
    data = dict(problem.data, aggregated=True)
    return replace(problem, name=problem.name + '-lse', constraints=(logsumexp_aggregate(problem.constraints),),
                   structure='single-constraint', constants=replace(constants, ell_g=ell_g), data=data)
