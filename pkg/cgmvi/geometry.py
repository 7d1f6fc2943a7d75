# -*- coding: utf-8 -*-
"""
Active sets, velocity polytopes and projection oracles.

The velocity polytope at x is V(x) = {v | alpha g_i(x) + grad g_i(x)^T v <= 0, i active},
stored as normals G (k x d) and offsets b (alpha g_i(x)) so that v is feasible iff G v <= -b.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from cgmvi.errors import InfeasibleLinearizationError, InvalidArgumentError

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class ActiveSet:
    indices: Tuple[int, ...]
    aux_active: bool = False
    values: Optional[np.ndarray] = None
    gradients: Optional[np.ndarray] = None
    aux_value: Optional[float] = None
    aux_radius: Optional[float] = None

    def __len__(self):
        return len(self.indices) + int(self.aux_active)


@dataclass(frozen=True, eq=False)
class VelocityPolytope:
    normals: np.ndarray
    offsets: np.ndarray
    alpha: float
    indices: Tuple[int, ...] = ()

    @property
    def k(self):
        return self.normals.shape[0]

    @property
    def dim(self):
        return self.normals.shape[1]

    def residual(self, v):
        """G v + b, nonpositive on the polytope."""
        return self.normals @ np.asarray(v, dtype=float) + self.offsets

    def contains(self, v, tol=None):
        if self.k == 0:
            return True
        if tol is None:
            tol = 1e-9 * (1.0 + np.linalg.norm(self.offsets))
        return bool(np.all(self.residual(v) <= tol))


def active_set(problem, x, include_aux=False, aux_radius=None):
    """
    Constraints with g_i(x) >= 0 at x. The boundary counts as active.

    :param problem: ProblemInstance
    :param x: query point
    :param include_aux: also test the auxiliary ball constraint ||x||^2 - D^2
    :param aux_radius: radius of the auxiliary ball, defaults to the instance constant D
    :return: ActiveSet
    """
    x = np.asarray(x, dtype=float)
    indices, values, gradients = [], [], []
    for i, constraint in enumerate(problem.constraints):
        g = float(constraint.value(x))
        if g >= 0:
            indices.append(i)
            values.append(g)
            gradients.append(np.asarray(constraint.gradient(x), dtype=float))
    aux_active = False
    aux_value = None
    if include_aux:
        aux_radius = problem.constants.D if aux_radius is None else aux_radius
        aux_value = float(x @ x - aux_radius ** 2)
        aux_active = aux_value >= 0
    return ActiveSet(indices=tuple(indices), aux_active=aux_active,
                     values=np.array(values), gradients=np.array(gradients).reshape(len(indices), x.size),
                     aux_value=aux_value, aux_radius=aux_radius)


def build_polytope(problem, x, alpha, active):
    """
    Assemble V_alpha(x) from an active set: rows in index order, auxiliary row last.
    Rows with a zero gradient and g_i(x) = 0 impose nothing and are skipped.
    """
    if not alpha > 0:
        raise InvalidArgumentError('alpha must be positive, got {0!r}'.format(alpha))
    x = np.asarray(x, dtype=float)
    rows, offsets, kept = [], [], []
    for i, g, grad in zip(active.indices, active.values, active.gradients):
        if not np.any(grad):
            if g > 0:
                raise InfeasibleLinearizationError(
                    'constraint {0} is violated (g={1:.3e}) with a zero gradient'.format(i, g))
            continue
        rows.append(grad)
        offsets.append(alpha * g)
        kept.append(i)
    if active.aux_active:
        rows.append(2.0 * x)
        offsets.append(alpha * active.aux_value)
        kept.append(problem.m)
    return VelocityPolytope(normals=np.array(rows, dtype=float).reshape(len(rows), x.size),
                            offsets=np.array(offsets, dtype=float), alpha=float(alpha),
                            indices=tuple(kept))


def velocity_polytope(problem, x, alpha, include_aux=False, aux_radius=None):
    return build_polytope(problem, x, alpha, active_set(problem, x, include_aux, aux_radius))


def _index_mask(N, d):
    mask = np.zeros(d, dtype=bool)
    N = np.asarray(list(N) if not isinstance(N, np.ndarray) else N)
    if N.dtype == bool:
        if N.size != d:
            raise InvalidArgumentError('boolean index mask must have length {0}'.format(d))
        return N.copy()
    if N.size:
        mask[N.astype(int)] = True
    return mask


def proj_v(q, N):
    """
    Euclidean projection of q onto {p | sum(p) = 1, p_i >= 0 for i in N}.

    Sorts the restricted coordinates in descending order and finds the shift lambda
    from the largest index rho passing r_rho + (1 - s - sum_{j<=rho} r_j) / (d - n + rho) > 0,
    where s sums the unrestricted coordinates and n = |N|.

    :param q: point in R^d
    :param N: indices (0-based) or boolean mask of the sign-restricted coordinates
    :return: the projection p
    """
    q = np.asarray(q, dtype=float)
    d = q.size
    mask = _index_mask(N, d)
    n = int(mask.sum())
    s_free = float(np.sum(q[~mask]))
    restricted = q[mask]
    r = restricted[np.argsort(-restricted, kind='stable')]
    partial = np.cumsum(r)
    j = np.arange(1, n + 1)
    passing = r + (1.0 - s_free - partial) / (d - n + j) > 0
    if np.any(passing):
        rho = int(j[passing].max())
        shift = (1.0 - s_free - partial[rho - 1]) / (d - n + rho)
    else:
        assert n < d, 'an all-restricted projection always has a passing index'
        shift = (1.0 - s_free) / (d - n)
    p = q + shift
    p[mask] = np.maximum(p[mask], 0.0)
    return p


def project_simplex(q):
    q = np.asarray(q, dtype=float)
    return proj_v(q, np.ones(q.size, dtype=bool))


def project_ball(y, radius):
    if not radius > 0:
        raise InvalidArgumentError('radius must be positive, got {0!r}'.format(radius))
    y = np.asarray(y, dtype=float)
    norm = np.linalg.norm(y)
    if norm <= radius:
        return y.copy()
    return (radius / norm) * y


def project_onto_feasible(problem, x, anchor=None, iterations=60):
    """
    A feasible point near x: exact projection for simplex and ball instances,
    otherwise the last feasible point found by bisection on the segment from anchor to x.
    """
    x = np.asarray(x, dtype=float)
    if problem.structure == 'simplex':
        return project_simplex(x)
    radius = problem.data.get('ball_radius')
    if radius is not None and problem.m == 1:
        return project_ball(x, radius)
    if problem.is_feasible(x):
        return x.copy()
    anchor = np.zeros(problem.dim) if anchor is None else np.asarray(anchor, dtype=float)
    if not problem.is_feasible(anchor):
        raise InvalidArgumentError('bisection anchor is not feasible for {0}'.format(problem.name))
    lo, hi = 0.0, 1.0
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        if problem.is_feasible(anchor + mid * (x - anchor)):
            lo = mid
        else:
            hi = mid
    logger.debug('feasible start by bisection at fraction %.6f', lo)
    return anchor + lo * (x - anchor)
