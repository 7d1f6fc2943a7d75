# -*- coding: utf-8 -*-
"""
Constrained gradient method.

Each iteration linearizes the active constraints into a velocity polytope, picks the velocity
closest to -F(x_t) inside it and moves x_{t+1} = x_t + eta_t v_t. Simplex instances use the
direct update x_{t+1} = (1 - alpha eta) x_t + alpha eta proj_v(x_t - F(x_t) / alpha, N_t).
"""

import logging
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Optional, Sequence, Union

import numpy as np
import pandas as pd

from cgmvi import geometry, metrics, qp
from cgmvi.errors import CGMError, InvalidConfigError
from cgmvi.problems import ProblemInstance

logger = logging.getLogger(__name__)

SCHEDULES = ('constant', 'inverse-t', 'log-over-T')
AVERAGING = ('uniform', 'linear-weight', 'last')
INITS = ('default', 'gaussian', 'feasible')
DEFAULT_AVERAGING = {'constant': 'uniform', 'inverse-t': 'linear-weight', 'log-over-T': 'last'}


@dataclass
class SolverConfig:
    T: int = 100
    schedule: str = 'constant'
    eta: Optional[float] = None
    mu: Optional[float] = None
    alpha: Union[float, str] = 'from-theorem'
    epsilon: float = 1e-8
    averaging: Optional[str] = None
    include_aux: bool = False
    gamma: float = 3.0
    seed: int = 0
    init: str = 'default'
    x0: Optional[Sequence[float]] = None
    qp_method: str = 'active-set'
    fallback_threshold: int = 50

    @classmethod
    def from_dict(cls, settings):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(settings) - known)
        if unknown:
            raise InvalidConfigError('unknown solver setting(s): {0}'.format(', '.join(unknown)))
        return cls(**settings)

    def to_dict(self):
        settings = asdict(self)
        if settings['x0'] is not None:
            settings['x0'] = [float(value) for value in settings['x0']]
        return settings

    def validate(self):
        if int(self.T) != self.T or self.T < 1:
            raise InvalidConfigError('T must be a positive integer, got {0!r}'.format(self.T))
        if self.schedule not in SCHEDULES:
            raise InvalidConfigError('schedule must be one of {0}, got {1!r}'.format(SCHEDULES, self.schedule))
        if self.eta is not None and not self.eta > 0:
            raise InvalidConfigError('eta must be positive, got {0!r}'.format(self.eta))
        if self.mu is not None and not self.mu > 0:
            raise InvalidConfigError('mu must be positive, got {0!r}'.format(self.mu))
        if isinstance(self.alpha, str):
            if self.alpha != 'from-theorem':
                raise InvalidConfigError('alpha must be positive or "from-theorem", got {0!r}'.format(self.alpha))
        elif not self.alpha > 0:
            raise InvalidConfigError('alpha must be positive, got {0!r}'.format(self.alpha))
        if not self.epsilon >= 0:
            raise InvalidConfigError('epsilon must be nonnegative, got {0!r}'.format(self.epsilon))
        if self.averaging is not None and self.averaging not in AVERAGING:
            raise InvalidConfigError('averaging must be one of {0}, got {1!r}'.format(AVERAGING, self.averaging))
        if not self.gamma > 1:
            raise InvalidConfigError('gamma must exceed 1, got {0!r}'.format(self.gamma))
        if self.init not in INITS:
            raise InvalidConfigError('init must be one of {0}, got {1!r}'.format(INITS, self.init))
        if self.qp_method not in qp.METHODS:
            raise InvalidConfigError('qp_method must be one of {0}, got {1!r}'.format(qp.METHODS, self.qp_method))
        if int(self.fallback_threshold) != self.fallback_threshold or self.fallback_threshold < 1:
            raise InvalidConfigError('fallback_threshold must be a positive integer')
        return self


@dataclass(frozen=True)
class StepSchedule:
    kind: str
    eta: Optional[float] = None
    mu: Optional[float] = None

    def step(self, t):
        if self.kind == 'inverse-t':
            return 1.0 / (self.mu * (t + 1))
        return self.eta


@dataclass(frozen=True)
class TraceEvent:
    t: int
    feasibility: float
    gap: float
    v_norm: float
    active_count: int
    delta: float


@dataclass(eq=False)
class RunTrace:
    iterates: np.ndarray
    velocities: np.ndarray
    etas: np.ndarray
    active_counts: np.ndarray
    deltas: np.ndarray
    feasibilities: np.ndarray
    averages: np.ndarray
    averaging: str
    alpha: float
    report_feasibilities: np.ndarray = None
    gaps: np.ndarray = None
    solver_tags: dict = field(default_factory=dict)

    @property
    def T(self):
        return len(self.etas)

    @property
    def output(self):
        return self.iterates[-1] if self.averaging == 'last' else self.averages[-1]

    def replay_error(self):
        """Largest deviation of x_{t+1} from x_t + eta_t v_t."""
        if self.T == 0:
            return 0.0
        replayed = self.iterates[:-1] + self.etas[:, None] * self.velocities
        return float(np.max(np.abs(replayed - self.iterates[1:])))

    def to_frame(self):
        return pd.DataFrame({'t': np.arange(1, self.T + 1),
                             'eta': self.etas,
                             'active_count': self.active_counts,
                             'delta': self.deltas,
                             'v_norm': np.linalg.norm(self.velocities, axis=1),
                             'feasibility': self.feasibilities[1:],
                             'report_feasibility': self.report_feasibilities,
                             'gap': self.gaps})


@dataclass(frozen=True)
class OperatorSpec:
    operator: Callable
    objective: Optional[Callable] = None


def gradient_operator(gradient, objective=None):
    """Variational inequality operator F = grad f of a convex objective f."""
    if not callable(gradient):
        raise InvalidConfigError('gradient must be callable')
    return OperatorSpec(operator=lambda x: np.asarray(gradient(np.asarray(x, dtype=float)), dtype=float),
                        objective=objective)


def minimization_instance(spec, constraints, constants, name='minimization', reference_solution=None,
                          data=None, dim=None):
    """Convex minimization of spec.objective over the constraints, posed as a variational inequality."""
    constraints = tuple(constraints)
    if dim is None:
        dim = np.asarray(reference_solution).size
    structure = 'single-constraint' if len(constraints) == 1 else 'generic'
    return ProblemInstance(name=name, dim=int(dim), operator=spec.operator, constraints=constraints,
                           constants=constants, structure=structure, reference_solution=reference_solution,
                           objective=spec.objective, data=data or {})


def _require(value, name, schedule):
    if value is None or not value > 0:
        raise InvalidConfigError('{0} schedule needs a positive {1}'.format(schedule, name))
    return value


def schedule_theorem1(problem, T):
    """Constant step D / (5 L_F sqrt(2T)) with alpha = L_F / D."""
    L_F = _require(problem.constants.L_F, 'L_F', 'theorem1')
    D = _require(problem.constants.D, 'D', 'theorem1')
    return D / (5.0 * L_F * np.sqrt(2.0 * T)), L_F / D


def schedule_theorem2(problem, gamma, mu=None):
    """Steps 1 / (mu (t + 1)) with alpha = mu (gamma - 1) / (gamma + 1)."""
    mu = _require(problem.constants.mu if mu is None else mu, 'mu', 'theorem2')
    if not gamma > 1:
        raise InvalidConfigError('gamma must exceed 1, got {0!r}'.format(gamma))
    return StepSchedule(kind='inverse-t', mu=mu), mu * (gamma - 1.0) / (gamma + 1.0)


def schedule_theorem3(problem, T, mu=None):
    """Constant step log(T) / (mu T) with alpha = mu, for T >= max(3, ell_f / mu) log T."""
    mu = _require(problem.constants.mu if mu is None else mu, 'mu', 'theorem3')
    ell_f = _require(problem.constants.ell_f, 'ell_f', 'theorem3')
    if T < max(3.0, ell_f / mu) * np.log(T):
        raise InvalidConfigError('T={0} is too small for the log-over-T schedule (needs T >= {1:.2f} log T)'
                                 .format(T, max(3.0, ell_f / mu)))
    return np.log(T) / (mu * T), mu


def resolve_schedule(problem, config):
    """
    Step rule, alpha and averaging scheme of a run.

    :param problem: ProblemInstance
    :param config: SolverConfig
    :return: (StepSchedule, alpha, averaging)
    """
    averaging = config.averaging or DEFAULT_AVERAGING[config.schedule]
    if config.schedule == 'constant':
        if config.eta is None or config.alpha == 'from-theorem':
            eta, alpha = schedule_theorem1(problem, config.T)
        eta = config.eta if config.eta is not None else eta
        alpha = config.alpha if config.alpha != 'from-theorem' else alpha
        return StepSchedule(kind='constant', eta=eta), float(alpha), averaging
    if config.schedule == 'inverse-t':
        schedule, alpha = schedule_theorem2(problem, config.gamma, config.mu)
    else:
        eta, alpha = schedule_theorem3(problem, config.T, config.mu)
        schedule = StepSchedule(kind='log-over-T', eta=eta)
    if config.alpha != 'from-theorem':
        alpha = config.alpha
    return schedule, float(alpha), averaging


def average_iterates(iterates, scheme):
    """
    Output point of the iterates x_0, ..., x_{T-1}: their mean (uniform), the t-weighted mean
    2 / (T (T - 1)) sum t x_t (linear-weight), or the final row (last).
    """
    iterates = np.asarray(iterates, dtype=float)
    if iterates.ndim == 1:
        iterates = iterates[:, None]
    if scheme not in AVERAGING:
        raise InvalidConfigError('unknown averaging scheme {0!r}'.format(scheme))
    T = iterates.shape[0]
    if scheme == 'last' or (T < 2 and scheme == 'linear-weight'):
        return iterates[-1]
    if scheme == 'uniform':
        return iterates.mean(axis=0)
    weights = np.arange(T, dtype=float)
    return weights @ iterates * (2.0 / (T * (T - 1.0)))


class _RunningAverage(object):

    def __init__(self, scheme, dim):
        self.scheme = scheme
        self.total = np.zeros(dim)
        self.weight = 0.0
        self.count = 0

    def add(self, x):
        """Account for x_t and return the current reported point."""
        w = 1.0 if self.scheme == 'uniform' else float(self.count)
        self.total += w * x
        self.weight += w
        self.count += 1
        if self.weight == 0:
            return x.copy()
        return self.total / self.weight


def initial_point(problem, config, x0=None):
    """Start of a run: explicit x0, config x0, the instance default or an N(0, 1) sample."""
    if x0 is None and config.x0 is not None:
        x0 = config.x0
    if x0 is not None:
        x0 = np.array(x0, dtype=float)
        if x0.shape != (problem.dim,):
            raise InvalidConfigError('x0 must have {0} entries, got shape {1}'.format(problem.dim, x0.shape))
        return geometry.project_onto_feasible(problem, x0) if config.init == 'feasible' else x0
    rng = np.random.default_rng(config.seed)
    if config.init == 'default' and problem.default_start is not None:
        return np.array(problem.default_start, dtype=float)
    x0 = rng.standard_normal(problem.dim)
    if config.init == 'feasible':
        start = problem.default_start if problem.default_start is not None else x0
        return geometry.project_onto_feasible(problem, start)
    return x0


def _velocity_bound(problem, alpha, gamma):
    if problem.constants.L_F is None:
        return None
    return float(np.sqrt(metrics.lemma1_bounds(problem.constants.D, problem.constants.L_F, alpha, gamma)[1]))


def _direction(problem, polytope, Fx, alpha, config, velocity_bound):
    if problem.structure == 'single-constraint' and polytope.k <= 1 and config.qp_method == 'active-set':
        if polytope.k == 0:
            return qp.solve_direction_generic(polytope, Fx, config.epsilon)
        return qp.solve_direction_single(polytope.offsets[0] / alpha, polytope.normals[0], Fx, alpha)
    return qp.solve_direction_generic(polytope, Fx, config.epsilon, method=config.qp_method,
                                      fallback_threshold=config.fallback_threshold,
                                      velocity_bound=velocity_bound)


class TraceRecorder(object):
    """Fills the trace arrays and forwards one TraceEvent per iteration."""

    def __init__(self, problem, x0, T, averaging, callback, gap_fn):
        self.problem = problem
        self.iterates = np.zeros((T + 1, problem.dim))
        self.iterates[0] = x0
        self.velocities = np.zeros((T, problem.dim))
        self.etas = np.zeros(T)
        self.active_counts = np.zeros(T, dtype=int)
        self.deltas = np.zeros(T)
        self.feasibilities = np.zeros(T + 1)
        self.feasibilities[0] = metrics.feasibility(problem, x0)
        self.averages = np.zeros((T, problem.dim))
        self.report_feasibilities = np.zeros(T)
        self.gaps = np.full(T, np.nan)
        self.averaging = averaging
        self.running = _RunningAverage(averaging, problem.dim)
        self.callback = callback
        self.gap_fn = gap_fn
        self.solver_tags = {}

    def record(self, t, x, v, eta, active_count, result_delta, x_next, tag):
        self.velocities[t] = v
        self.etas[t] = eta
        self.active_counts[t] = active_count
        self.deltas[t] = result_delta
        self.iterates[t + 1] = x_next
        self.feasibilities[t + 1] = metrics.feasibility(self.problem, x_next)
        average = self.running.add(x)
        report = x_next if self.averaging == 'last' else average
        self.averages[t] = report
        self.report_feasibilities[t] = self.feasibilities[t + 1] if self.averaging == 'last' \
            else metrics.feasibility(self.problem, report)
        if self.gap_fn is not None:
            self.gaps[t] = self.gap_fn(report)
        self.solver_tags[tag] = self.solver_tags.get(tag, 0) + 1
        if self.callback is not None:
            self.callback(TraceEvent(t=t + 1, feasibility=float(self.report_feasibilities[t]),
                                     gap=float(self.gaps[t]), v_norm=float(np.linalg.norm(v)),
                                     active_count=int(active_count), delta=float(result_delta)))

    def trace(self, alpha):
        return RunTrace(iterates=self.iterates, velocities=self.velocities, etas=self.etas,
                        active_counts=self.active_counts, deltas=self.deltas, feasibilities=self.feasibilities,
                        averages=self.averages, averaging=self.averaging, alpha=alpha,
                        report_feasibilities=self.report_feasibilities, gaps=self.gaps,
                        solver_tags=self.solver_tags)


def cgm_run(problem, config, x0=None, callback=None, gap_fn=None):
    """
    Run T iterations of the constrained gradient method.

    :param problem: ProblemInstance
    :param config: SolverConfig
    :param x0: optional start, overrides config.x0
    :param callback: called with a TraceEvent after every iteration
    :param gap_fn: cheap gap evaluator applied to the reported iterate
    :return: (output, RunTrace)
    """
    config.validate()
    if problem.structure == 'simplex':
        return simplex_cgm_run(problem, config, x0=x0, callback=callback, gap_fn=gap_fn)
    schedule, alpha, averaging = resolve_schedule(problem, config)
    x = initial_point(problem, config, x0)
    T = int(config.T)
    velocity_bound = _velocity_bound(problem, alpha, config.gamma) if config.qp_method == 'frank-wolfe' else None
    recorder = TraceRecorder(problem, x, T, averaging, callback, gap_fn)
    logger.info('cgm on %s: d=%d T=%d alpha=%.4g schedule=%s averaging=%s',
                problem.name, problem.dim, T, alpha, schedule.kind, averaging)
    for t in range(T):
        eta = schedule.step(t)
        try:
            rng = problem.reseed(config.seed, t) if problem.stochastic else None
            Fx = problem.F(x, rng)
            active = geometry.active_set(problem, x, config.include_aux)
            polytope = geometry.build_polytope(problem, x, alpha, active)
            result = _direction(problem, polytope, Fx, alpha, config, velocity_bound)
        except CGMError as error:
            error.iteration = t
            raise
        x_next = x + eta * result.v
        recorder.record(t, x, result.v, eta, polytope.k, result.delta, x_next, result.solver_tag)
        logger.debug('t=%d active=%d delta=%.3e |v|=%.4g', t, polytope.k, result.delta, np.linalg.norm(result.v))
        x = x_next
    trace = recorder.trace(alpha)
    logger.info('cgm on %s finished: feasibility of output %.3e', problem.name,
                metrics.feasibility(problem, trace.output))
    return trace.output, trace


def simplex_cgm_run(problem, config, x0=None, callback=None, gap_fn=None):
    """
    Direct simplex update with N_t = {i | x_{t,i} <= 0}. The affine residual sum(x_t) - 1
    contracts by the factor (1 - alpha eta) each iteration.
    """
    config.validate()
    if problem.structure != 'simplex':
        raise InvalidConfigError('{0} does not have the simplex structure'.format(problem.name))
    schedule, alpha, averaging = resolve_schedule(problem, config)
    x = initial_point(problem, config, x0)
    T = int(config.T)
    recorder = TraceRecorder(problem, x, T, averaging, callback, gap_fn)
    logger.info('simplex cgm on %s: d=%d T=%d alpha=%.4g', problem.name, problem.dim, T, alpha)
    for t in range(T):
        eta = schedule.step(t)
        try:
            rng = problem.reseed(config.seed, t) if problem.stochastic else None
            Fx = problem.F(x, rng)
        except CGMError as error:
            error.iteration = t
            raise
        restricted = x <= 0
        p = geometry.proj_v(x - Fx / alpha, restricted)
        v = alpha * (p - x)
        x_next = x + eta * v
        recorder.record(t, x, v, eta, int(restricted.sum()), 0.0, x_next, 'simplex')
        x = x_next
    trace = recorder.trace(alpha)
    logger.info('simplex cgm on %s finished: feasibility of output %.3e', problem.name,
                metrics.feasibility(problem, trace.output))
    return trace.output, trace
