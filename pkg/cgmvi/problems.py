# -*- coding: utf-8 -*-
"""
Constrained variational inequality instances.

A problem asks for x* in C = {x | g_i(x) <= 0} with F(x*)^T (x* - x) <= 0 for
all x in C. Instances bundle the operator F, the convex constraints g_i with
their gradients and the constants (D, L_F, L_g, ell_g, mu) the step-size
schedules are derived from.
"""

import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import optimize, stats

from cgmvi.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

STRUCTURES = ('generic', 'single-constraint', 'simplex')
FORSAKEN_START = (0.5, 1.0)


@dataclass(frozen=True)
class Constraint:
    """Convex constraint g(x) <= 0. Calling it returns (g(x), grad g(x))."""
    value: Callable
    gradient: Callable
    name: str = 'g'

    def __call__(self, x):
        return float(self.value(x)), np.asarray(self.gradient(x), dtype=float)


@dataclass(frozen=True)
class ProblemConstants:
    D: float
    L_F: Optional[float] = None
    L_g: Optional[float] = None
    ell_g: Optional[float] = None
    mu: float = 0.0
    ell_f: Optional[float] = None
    L_f: Optional[float] = None
    empirical: bool = False

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    name: str
    dim: int
    operator: Callable
    constraints: Tuple[Constraint, ...]
    constants: ProblemConstants
    structure: str = 'generic'
    reference_solution: Optional[np.ndarray] = None
    stochastic: bool = False
    sample_count: Optional[int] = None
    expected_operator: Optional[Callable] = None
    monotone: bool = True
    default_start: Optional[np.ndarray] = None
    objective: Optional[Callable] = None
    data: dict = field(default_factory=dict)
    seed: Optional[int] = None
    generator: Optional[str] = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidArgumentError('dim must be positive, got {0}'.format(self.dim))
        if self.structure not in STRUCTURES:
            raise InvalidArgumentError('unknown structure {0!r}'.format(self.structure))
        if self.structure != 'simplex' and len(self.constraints) < 1:
            raise InvalidArgumentError('at least one constraint is required outside the simplex structure')
        if self.structure == 'single-constraint' and len(self.constraints) != 1:
            raise InvalidArgumentError('single-constraint structure needs exactly one constraint')
        object.__setattr__(self, 'constraints', tuple(self.constraints))

    @property
    def m(self):
        return len(self.constraints)

    def F(self, x, rng=None):
        x = np.asarray(x, dtype=float)
        if self.stochastic:
            if rng is None:
                raise InvalidArgumentError('stochastic operator of {0} needs a generator'.format(self.name))
            return np.asarray(self.operator(x, rng), dtype=float)
        return np.asarray(self.operator(x), dtype=float)

    def mean_F(self, x):
        """Deterministic operator, or the infinite-sample limit of a stochastic one."""
        if self.stochastic:
            return np.asarray(self.expected_operator(np.asarray(x, dtype=float)), dtype=float)
        return self.F(x)

    def reseed(self, run_seed, t):
        """Generator for the operator query at iteration t of a run seeded with run_seed."""
        return np.random.default_rng([int(self.seed or 0), int(run_seed), int(t)])

    def constraint_values(self, x):
        x = np.asarray(x, dtype=float)
        return np.array([float(c.value(x)) for c in self.constraints])

    def is_feasible(self, x, tol=0.0):
        x = np.asarray(x, dtype=float)
        if self.structure == 'simplex':
            return bool(np.all(x >= -tol) and abs(np.sum(x) - 1.0) <= tol)
        return bool(np.all(self.constraint_values(x) <= tol))

    def with_constants(self, **changes):
        return replace(self, constants=replace(self.constants, **changes))

    def descriptor(self):
        """JSON-serializable description from which the instance can be rebuilt."""
        return {'generator': self.generator,
                'name': self.name,
                'dim': self.dim,
                'seed': self.seed,
                'sample_count': self.sample_count,
                'params': dict(self.params),
                'aggregate': bool(self.data.get('aggregated', False)),
                'constants': self.constants.to_dict()}


def sample_ball(rng, n, dim, radius):
    """n points drawn uniformly from the Euclidean ball of the given radius."""
    directions = rng.standard_normal((n, dim))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    radii = radius * rng.uniform(0.0, 1.0, size=(n, 1)) ** (1.0 / dim)
    return directions * radii


def estimate_constants(operator, constraints, dim, D, mu=0.0, n_samples=10000, margin=1.5, seed=0):
    """
    Sample-based estimates of L_F, L_g and ell_g on the ball of radius 2D.

    :param operator: deterministic operator (use the expected operator for stochastic instances)
    :param constraints: sequence of Constraint
    :param dim: dimension
    :param D: radius of a ball containing the feasible set
    :param mu: strong monotonicity modulus (passed through)
    :param n_samples: number of sampled points
    :param margin: safety factor applied to every sampled maximum
    :param seed: seed of the sampler
    :return: ProblemConstants flagged empirical
    """
    rng = np.random.default_rng(seed)
    points = sample_ball(rng, n_samples, dim, 2.0 * D)
    L_F = max(np.linalg.norm(operator(p)) for p in points)
    L_g = 0.0
    ell_g = 0.0
    half = n_samples // 2
    for constraint in constraints:
        grads = np.array([constraint.gradient(p) for p in points])
        L_g = max(L_g, float(np.max(np.linalg.norm(grads, axis=1))))
        steps = np.linalg.norm(points[:half] - points[half:2 * half], axis=1)
        changes = np.linalg.norm(grads[:half] - grads[half:2 * half], axis=1)
        ratios = changes[steps > 0] / steps[steps > 0]
        if ratios.size:
            ell_g = max(ell_g, float(np.max(ratios)))
    return ProblemConstants(D=float(D), L_F=margin * float(L_F), L_g=margin * L_g, ell_g=margin * ell_g,
                            mu=float(mu), empirical=True)


def _ellipse_constraint():
    return Constraint(value=lambda z: z[0] ** 2 + 4.0 * z[1] ** 2 - 1.0,
                      gradient=lambda z: np.array([2.0 * z[0], 8.0 * z[1]]),
                      name='ellipse')


def _quadratic_constraint(B, c, name='quadratic'):
    return Constraint(value=lambda z: 0.5 * z @ B @ z - c,
                      gradient=lambda z: B @ z,
                      name=name)


def _random_spd(rng, n):
    Q = stats.ortho_group.rvs(n, random_state=rng)
    eigenvalues = rng.uniform(0.1, 10.0, size=n)
    B = (Q * eigenvalues) @ Q.T
    return 0.5 * (B + B.T), eigenvalues


def _check_dimension(d):
    if int(d) != d or d < 1:
        raise InvalidArgumentError('d must be a positive integer, got {0!r}'.format(d))
    return int(d)


def _h(u):
    return u ** 2 / 4.0 - u ** 4 / 2.0 + u ** 6 / 6.0


def _h_prime(u):
    return u / 2.0 - 2.0 * u ** 3 + u ** 5


def make_forsaken():
    """
    Forsaken game min_x max_y x(y - 0.45) + h(x) - h(y) on the ellipse x^2 + 4y^2 <= 1.
    """
    def payoff(z):
        return z[0] * (z[1] - 0.45) + _h(z[0]) - _h(z[1])

    def operator(z):
        return np.array([z[1] - 0.45 + _h_prime(z[0]), -z[0] + _h_prime(z[1])])

    # the constrained solution is interior, hence a zero of F
    root = optimize.root(operator, np.array([0.0, 0.45]), tol=1e-14)
    constraints = (_ellipse_constraint(),)
    constants = estimate_constants(operator, constraints, 2, 1.0)
    return ProblemInstance(name='forsaken', dim=2, operator=operator, constraints=constraints,
                           constants=constants, structure='single-constraint',
                           reference_solution=np.asarray(root.x), monotone=False,
                           default_start=np.array(FORSAKEN_START), data={'payoff': payoff},
                           seed=0, generator='forsaken')


def make_toy_gan(sample_count=1000, seed=0):
    """
    Toy GAN learning the variance of N(0, 1) data, min_x max_y y E[u1^2] - y x^2 E[u2^2],
    on the ellipse x^2 + 4y^2 <= 1. Every operator query draws sample_count values of u1 and u2.
    """
    if int(sample_count) != sample_count or sample_count < 1:
        raise InvalidArgumentError('sample_count must be a positive integer, got {0!r}'.format(sample_count))
    sample_count = int(sample_count)

    def operator(z, rng):
        u1 = rng.standard_normal(sample_count)
        u2 = rng.standard_normal(sample_count)
        m1 = np.mean(u1 ** 2)
        m2 = np.mean(u2 ** 2)
        return np.array([-2.0 * z[0] * z[1] * m2, z[0] ** 2 * m2 - m1])

    def expected_operator(z):
        return np.array([-2.0 * z[0] * z[1], z[0] ** 2 - 1.0])

    def payoff(z):
        return z[1] * (1.0 - z[0] ** 2)

    constraints = (_ellipse_constraint(),)
    constants = estimate_constants(expected_operator, constraints, 2, 1.0, seed=seed)
    return ProblemInstance(name='toy-gan', dim=2, operator=operator, constraints=constraints,
                           constants=constants, structure='single-constraint',
                           reference_solution=np.array([1.0, 0.0]), stochastic=True,
                           sample_count=sample_count, expected_operator=expected_operator,
                           monotone=False, default_start=np.array(FORSAKEN_START),
                           data={'payoff': payoff}, seed=seed, generator='toy-gan',
                           params={'sample_count': sample_count, 'seed': seed})


def make_matrix_game_quadratic(d, seed=0):
    """
    Matrix game min_x max_y (x - a)^T A y subject to (1/2) z^T B z <= c with z = (x, y).

    :param d: dimension of each player
    :param seed: seed of A, a, B and c
    :return: ProblemInstance on R^{2d}
    """
    d = _check_dimension(d)
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d))
    a = rng.normal(0.0, 0.1, size=d)
    B, eigenvalues = _random_spd(rng, 2 * d)
    c = float(rng.uniform(0.1, 10.0))

    def operator(z):
        return np.concatenate([A @ z[d:], -A.T @ (z[:d] - a)])

    D = float(np.sqrt(2.0 * c / eigenvalues.min()))
    lambda_max = float(eigenvalues.max())
    constants = ProblemConstants(D=D, L_F=2.0 * D * np.linalg.norm(A, 2) + float(np.linalg.norm(A.T @ a)),
                                 L_g=2.0 * D * lambda_max, ell_g=lambda_max, mu=0.0)
    logger.debug('quadratic game d=%d seed=%s c=%.4f D=%.4f', d, seed, c, D)
    return ProblemInstance(name='quadratic-game', dim=2 * d, operator=operator,
                           constraints=(_quadratic_constraint(B, c),), constants=constants,
                           structure='single-constraint', data={'A': A, 'a': a, 'B': B, 'c': c},
                           seed=seed, generator='quadratic-game', params={'d': d, 'seed': seed})


def make_matrix_game_simplex(d, seed=0):
    """
    Matrix game min_x max_y x^T A y over the joint simplex sum(z) = 1, z >= 0.
    The simplex constraints are handled natively by the solvers, none is exposed.
    """
    d = _check_dimension(d)
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d))

    def operator(z):
        return np.concatenate([A @ z[d:], -A.T @ z[:d]])

    constants = ProblemConstants(D=1.0, L_F=2.0 * float(np.linalg.norm(A, 2)),
                                 L_g=float(np.sqrt(2 * d)), ell_g=0.0, mu=0.0)
    return ProblemInstance(name='simplex-game', dim=2 * d, operator=operator, constraints=(),
                           constants=constants, structure='simplex', data={'A': A},
                           seed=seed, generator='simplex-game', params={'d': d, 'seed': seed})


def explicit_simplex(problem):
    """
    The same simplex instance with its constraints written out as sum(z) - 1 <= 0,
    1 - sum(z) <= 0 and -z_i <= 0, for the generic solver.
    """
    if problem.structure != 'simplex':
        raise InvalidArgumentError('{0} does not have the simplex structure'.format(problem.name))
    d = problem.dim
    constraints = [Constraint(value=lambda z: float(np.sum(z)) - 1.0, gradient=lambda z: np.ones(d),
                              name='sum_upper'),
                   Constraint(value=lambda z: 1.0 - float(np.sum(z)), gradient=lambda z: -np.ones(d),
                              name='sum_lower')]
    for i in range(d):
        constraints.append(Constraint(value=lambda z, i=i: -float(z[i]), gradient=lambda z, i=i: -np.eye(d)[i],
                                      name='nonnegative_{0}'.format(i)))
    return replace(problem, name=problem.name + '-explicit', constraints=tuple(constraints), structure='generic',
                   generator=None)


def make_matrix_game_multi(d, m=3, seed=0):
    """Quadratic-constrained matrix game over the intersection of m random ellipsoids."""
    d = _check_dimension(d)
    if int(m) != m or m < 1:
        raise InvalidArgumentError('m must be a positive integer, got {0!r}'.format(m))
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((d, d))
    a = rng.normal(0.0, 0.1, size=d)
    Bs, cs, constraints = [], [], []
    D = np.inf
    lambda_max = 0.0
    for i in range(int(m)):
        B, eigenvalues = _random_spd(rng, 2 * d)
        c = float(rng.uniform(0.1, 10.0))
        Bs.append(B)
        cs.append(c)
        constraints.append(_quadratic_constraint(B, c, name='ellipsoid_{0}'.format(i)))
        D = min(D, float(np.sqrt(2.0 * c / eigenvalues.min())))
        lambda_max = max(lambda_max, float(eigenvalues.max()))

    def operator(z):
        return np.concatenate([A @ z[d:], -A.T @ (z[:d] - a)])

    constants = ProblemConstants(D=D, L_F=2.0 * D * np.linalg.norm(A, 2) + float(np.linalg.norm(A.T @ a)),
                                 L_g=2.0 * D * lambda_max, ell_g=lambda_max, mu=0.0)
    return ProblemInstance(name='multi-game', dim=2 * d, operator=operator, constraints=tuple(constraints),
                           constants=constants, structure='generic',
                           data={'A': A, 'a': a, 'Bs': Bs, 'cs': cs},
                           seed=seed, generator='multi-game', params={'d': d, 'm': int(m), 'seed': seed})


def make_affine_ball(dim, seed=0, mu=1.0, skew=1.0, radius=1.0, center=None, shift=None):
    """
    Affine operator F(z) = mu (z - z0) + S (z - z0) + shift on the ball ||z|| <= radius,
    with S a random skew-symmetric matrix of spectral norm `skew`.

    With the defaults the solution z0 lies inside the ball at half the radius. mu = skew = 0
    gives the constant operator F = shift, solved at the boundary point -radius shift/||shift||.
    """
    dim = _check_dimension(dim)
    rng = np.random.default_rng(seed)
    K = rng.standard_normal((dim, dim))
    S = K - K.T
    norm = np.linalg.norm(S, 2)
    S = skew * S / norm if norm > 0 else np.zeros((dim, dim))
    if center is None:
        direction = rng.standard_normal(dim)
        center = 0.5 * radius * direction / np.linalg.norm(direction)
    center = np.asarray(center, dtype=float)
    shift = np.zeros(dim) if shift is None else np.asarray(shift, dtype=float)
    M = mu * np.eye(dim) + S

    def operator(z):
        return M @ (z - center) + shift

    reference = None
    if not np.any(shift) and np.linalg.norm(center) < radius:
        reference = center
    elif mu == 0 and skew == 0 and np.any(shift):
        reference = -radius * shift / np.linalg.norm(shift)
    B = np.eye(dim)
    c = 0.5 * radius ** 2
    constants = ProblemConstants(D=float(radius),
                                 L_F=(mu + skew) * (2.0 * radius + float(np.linalg.norm(center)))
                                 + float(np.linalg.norm(shift)),
                                 L_g=2.0 * radius, ell_g=1.0, mu=float(mu))
    params = {'dim': dim, 'seed': seed, 'mu': mu, 'skew': skew, 'radius': radius,
              'center': center.tolist(), 'shift': shift.tolist()}
    return ProblemInstance(name='affine-ball', dim=dim, operator=operator,
                           constraints=(_quadratic_constraint(B, c, name='ball'),), constants=constants,
                           structure='single-constraint', reference_solution=reference,
                           data={'B': B, 'c': c, 'ball_radius': float(radius), 'center': center},
                           seed=seed, generator='affine-ball', params=params)


def make_ball_minimization(center, radius=1.0):
    """
    Convex minimization of f(x) = (1/2)||x - x0||^2 over the ball ||x|| <= radius,
    posed as the variational inequality with F = grad f.
    """
    center = np.asarray(center, dtype=float)
    dim = _check_dimension(center.size)

    def objective(x):
        return 0.5 * float(np.sum((np.asarray(x) - center) ** 2))

    def operator(x):
        return np.asarray(x, dtype=float) - center

    norm = float(np.linalg.norm(center))
    reference = center if norm <= radius else radius * center / norm
    B = np.eye(dim)
    c = 0.5 * radius ** 2
    lipschitz = 2.0 * radius + norm
    constants = ProblemConstants(D=float(radius), L_F=lipschitz, L_g=2.0 * radius, ell_g=1.0,
                                 mu=1.0, ell_f=1.0, L_f=lipschitz)
    return ProblemInstance(name='ball-minimization', dim=dim, operator=operator,
                           constraints=(_quadratic_constraint(B, c, name='ball'),), constants=constants,
                           structure='single-constraint', reference_solution=reference,
                           objective=objective, data={'B': B, 'c': c, 'ball_radius': float(radius)},
                           generator='ball-minimization',
                           params={'center': center.tolist(), 'radius': radius})


def probe_monotonicity(problem, n_pairs=100, seed=0, radius=None):
    """
    Worst margin of (F(x) - F(y))^T (x - y) - mu ||x - y||^2 + 1e-10 (1 + ||x - y||^2)
    over random pairs from the D-ball. Nonnegative means the probe passed.
    """
    rng = np.random.default_rng(seed)
    radius = problem.constants.D if radius is None else radius
    points = sample_ball(rng, 2 * n_pairs, problem.dim, radius)
    worst = np.inf
    for x, y in zip(points[:n_pairs], points[n_pairs:]):
        diff = x - y
        sq = float(diff @ diff)
        margin = float((problem.mean_F(x) - problem.mean_F(y)) @ diff) - problem.constants.mu * sq \
            + 1e-10 * (1.0 + sq)
        worst = min(worst, margin)
    return worst


def probe_convexity(problem, n_triples=100, seed=0):
    """Worst convexity margin theta g(x) + (1 - theta) g(y) + 1e-10 - g(theta x + (1 - theta) y)."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    for constraint in problem.constraints:
        points = sample_ball(rng, 2 * n_triples, problem.dim, 2.0 * problem.constants.D)
        thetas = rng.uniform(0.0, 1.0, size=n_triples)
        for x, y, theta in zip(points[:n_triples], points[n_triples:], thetas):
            mixed = constraint.value(theta * x + (1.0 - theta) * y)
            margin = theta * constraint.value(x) + (1.0 - theta) * constraint.value(y) + 1e-10 - mixed
            worst = min(worst, float(margin))
    return worst


def _boundary_point(problem, direction, upper):
    lo, hi = 0.0, upper
    if problem.is_feasible(hi * direction):
        return hi * direction
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if problem.is_feasible(mid * direction):
            lo = mid
        else:
            hi = mid
    return lo * direction


def check_boundedness(problem, n_samples=1000, seed=0):
    """
    Largest ||x|| - D over sampled feasible points: uniform samples of the 2D-ball plus
    boundary points of C along random rays from the origin. Nonpositive means the check passed.
    """
    rng = np.random.default_rng(seed)
    D = problem.constants.D
    worst = -np.inf
    for x in sample_ball(rng, n_samples, problem.dim, 2.0 * D):
        if problem.is_feasible(x):
            worst = max(worst, float(np.linalg.norm(x)) - D)
    if problem.structure != 'simplex' and problem.is_feasible(np.zeros(problem.dim)):
        for _ in range(min(n_samples, 100)):
            direction = rng.standard_normal(problem.dim)
            direction /= np.linalg.norm(direction)
            point = _boundary_point(problem, direction, 4.0 * D)
            worst = max(worst, float(np.linalg.norm(point)) - D)
    return worst


def _central_difference(fun, x, step):
    grad = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        grad[i] = (fun(x + e) - fun(x - e)) / (2.0 * step)
    return grad


def check_gradients(problem, points=None, step=1e-5, seed=0):
    """
    Largest relative error ||fd - exact|| / max(1, ||exact||) of the constraint gradients,
    and of F against the payoff when the instance stores one.
    """
    if points is None:
        rng = np.random.default_rng(seed)
        points = sample_ball(rng, 5, problem.dim, problem.constants.D)
    worst = 0.0
    for x in np.atleast_2d(points):
        for constraint in problem.constraints:
            exact = np.asarray(constraint.gradient(x), dtype=float)
            fd = _central_difference(constraint.value, x, step)
            worst = max(worst, float(np.linalg.norm(fd - exact) / max(1.0, np.linalg.norm(exact))))
        payoff = problem.data.get('payoff')
        if payoff is not None:
            fd = _central_difference(payoff, x, step)
            # x descends the payoff, y ascends it
            fd[problem.dim // 2:] *= -1.0
            exact = problem.mean_F(x)
            worst = max(worst, float(np.linalg.norm(fd - exact) / max(1.0, np.linalg.norm(exact))))
    return worst
