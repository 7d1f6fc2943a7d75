# -*- coding: utf-8 -*-
"""
Brute-force enumerators used to cross-check the projection and direction solvers
on small instances, plus generators of random test cases.
"""

from itertools import chain, combinations

import numpy as np

from cgmvi.geometry import VelocityPolytope


def _subsets(indices):
    indices = list(indices)
    return chain.from_iterable(combinations(indices, size) for size in range(len(indices) + 1))


def brute_force_proj_v(q, N, tol=1e-12):
    """
    Projection onto {sum(p) = 1, p_i >= 0 for i in N} by trying every subset of N as the zero set,
    solving the equality-constrained system and keeping the closest feasible candidate.
    """
    q = np.asarray(q, dtype=float)
    d = q.size
    N = np.asarray(N)
    mask = N.copy() if N.dtype == bool else np.isin(np.arange(d), N.astype(int))
    restricted = [int(i) for i in np.flatnonzero(mask)]
    best, best_value = None, np.inf
    for zeros in _subsets(restricted):
        free = [i for i in range(d) if i not in zeros]
        if not free:
            continue
        shift = (1.0 - np.sum(q[free])) / len(free)
        p = np.zeros(d)
        p[free] = q[free] + shift
        if np.any(p[restricted] < -tol):
            continue
        value = 0.5 * np.sum((p - q) ** 2)
        if value < best_value:
            best, best_value = p, value
    return best


def brute_force_direction(polytope, Fx, tol=1e-10):
    """
    Minimizer of (1/2)||v + F||^2 over the polytope: every working set is solved as an
    equality-constrained KKT system and the best primal-feasible candidate is kept.
    """
    Fx = np.asarray(Fx, dtype=float)
    G, b = polytope.normals, polytope.offsets
    k, d = G.shape
    best, best_value = None, np.inf
    feas_tol = tol * (1.0 + np.linalg.norm(Fx) + np.linalg.norm(b))
    for working in _subsets(range(k)):
        working = list(working)
        q = len(working)
        kkt = np.zeros((d + q, d + q))
        kkt[:d, :d] = np.eye(d)
        kkt[:d, d:] = G[working].T
        kkt[d:, :d] = G[working]
        rhs = np.concatenate([-Fx, -b[working]])
        solution = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
        v = solution[:d]
        if q and np.max(np.abs(G[working] @ v + b[working])) > feas_tol:
            continue
        if k and np.max(G @ v + b) > feas_tol:
            continue
        value = 0.5 * np.sum((v + Fx) ** 2)
        if value < best_value:
            best, best_value = v, value
    return best


def random_polytope(rng, k, d, alpha=1.0, tight=0.5):
    """
    Random nonempty velocity polytope with k rows in R^d. A random point is made feasible,
    with roughly a `tight` fraction of the rows binding there.
    """
    G = rng.standard_normal((k, d))
    anchor = rng.standard_normal(d)
    slack = rng.uniform(0.0, 1.0, size=k) * (rng.uniform(size=k) > tight)
    offsets = -(G @ anchor) - slack
    return VelocityPolytope(normals=G, offsets=offsets, alpha=float(alpha), indices=tuple(range(k))), anchor


def random_restriction(rng, d):
    """Random (q, N) pair for the partial nonnegativity projection."""
    q = rng.normal(0.0, 2.0, size=d)
    N = rng.uniform(size=d) < rng.uniform()
    return q, N


def dyadic_simplex_point(rng, d, denominator=16):
    """Point with sum exactly 1 in floating point, some coordinates zero or negative."""
    numerators = rng.integers(-4, 12, size=d)
    numerators[rng.uniform(size=d) < 0.2] = 0
    numerators[-1] = denominator - np.sum(numerators[:-1])
    return numerators / float(denominator)
