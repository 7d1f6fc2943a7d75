# -*- coding: utf-8 -*-
"""
Run configurations, the problem registry and the run / sweep drivers behind the CLI.
"""

import itertools
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from cgmvi import baselines, metrics, problems, qp, solver
from cgmvi.errors import CGMError, InvalidArgumentError, InvalidConfigError
from cgmvi.utils.tracewriter import TraceWriter, read_summary, write_summary

logger = logging.getLogger(__name__)

SOLVERS = ('cgm', 'pgm', 'gda')
THEOREMS = {'theorem1': 'constant', 'theorem2': 'inverse-t'}
SWEEP_RATE_FIELDS = ('name', 'problem', 'seeds', 'T', 'theorem', 'gap', 'expected_slope', 'settings', 'output')
TRAJECTORY_MAX_DIM = 10


def _dimension(spec):
    d = spec.get('d', spec.get('dim'))
    if d is None:
        raise InvalidConfigError('problem {0!r} needs a dimension "d"'.format(spec.get('name')))
    return d


PROBLEMS = {
    'forsaken': lambda spec: problems.make_forsaken(),
    'toy-gan': lambda spec: problems.make_toy_gan(spec.get('sample_count', 1000), spec.get('seed', 0)),
    'quadratic-game': lambda spec: problems.make_matrix_game_quadratic(_dimension(spec), spec.get('seed', 0)),
    'simplex-game': lambda spec: problems.make_matrix_game_simplex(_dimension(spec), spec.get('seed', 0)),
    'multi-game': lambda spec: problems.make_matrix_game_multi(_dimension(spec), spec.get('m', 3),
                                                               spec.get('seed', 0)),
    'affine-ball': lambda spec: problems.make_affine_ball(_dimension(spec), spec.get('seed', 0),
                                                          mu=spec.get('mu', 1.0), skew=spec.get('skew', 1.0),
                                                          radius=spec.get('radius', 1.0),
                                                          center=spec.get('center'), shift=spec.get('shift')),
    'ball-minimization': lambda spec: problems.make_ball_minimization(
        spec['center'] if 'center' in spec else 2.0 * np.eye(_dimension(spec))[0], spec.get('radius', 1.0)),
}


def build_problem(spec):
    """
    Instance from a problem descriptor: either a config entry {"name", "d", "seed", ...}
    or the output of ProblemInstance.descriptor().
    """
    if 'generator' in spec and 'params' in spec:
        flat = dict(spec['params'], name=spec['generator'], aggregate=spec.get('aggregate', False))
    else:
        flat = dict(spec)
    name = flat.get('name')
    if name not in PROBLEMS:
        raise InvalidConfigError('unknown problem generator {0!r}, expected one of {1}'
                                 .format(name, ', '.join(sorted(PROBLEMS))))
    problem = PROBLEMS[name](flat)
    if flat.get('aggregate'):
        problem = qp.aggregate_constraints(problem)
    return problem


@dataclass
class RunConfig:
    name: str
    problem: dict
    solver: str = 'cgm'
    settings: dict = field(default_factory=dict)
    gap: Optional[str] = None
    output: dict = field(default_factory=lambda: {'directory': 'results'})
    sweep: dict = field(default_factory=dict)
    label: Optional[str] = None

    @classmethod
    def from_dict(cls, document):
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(document) - known)
        if unknown:
            raise InvalidConfigError('unknown config field(s): {0}'.format(', '.join(unknown)))
        if 'name' not in document or 'problem' not in document:
            raise InvalidConfigError('config needs "name" and "problem"')
        return cls(**document)

    def validate(self):
        if not isinstance(self.problem, dict) or self.problem.get('name') not in PROBLEMS:
            raise InvalidConfigError('problem.name must be one of {0}'.format(', '.join(sorted(PROBLEMS))))
        if self.solver not in SOLVERS:
            raise InvalidConfigError('solver must be one of {0}, got {1!r}'.format(SOLVERS, self.solver))
        if self.gap is not None and self.gap not in metrics.GAP_KINDS:
            raise InvalidConfigError('gap must be one of {0}, got {1!r}'.format(metrics.GAP_KINDS, self.gap))
        config = self.solver_config()
        if self.solver != 'cgm' and config.eta is None:
            raise InvalidConfigError('settings.eta is required for the {0} solver'.format(self.solver))
        return self

    def solver_config(self):
        return solver.SolverConfig.from_dict(self.settings).validate()

    @property
    def run_label(self):
        return self.label or self.name

    def to_dict(self):
        return asdict(self)


def _label_value(value):
    return str(value).replace(' ', '')


def expand_sweep(config):
    """Cartesian product of the sweep lists; "problem.<key>" fields target the problem descriptor."""
    if not config.sweep:
        return [config.validate()]
    keys = sorted(config.sweep)
    for key in keys:
        values = config.sweep[key]
        if not isinstance(values, list) or not values:
            raise InvalidConfigError('sweep.{0} must be a nonempty list'.format(key))
    runs = []
    for combination in itertools.product(*(config.sweep[key] for key in keys)):
        settings = dict(config.settings)
        problem = dict(config.problem)
        label = config.name
        for key, value in zip(keys, combination):
            if key.startswith('problem.'):
                problem[key[len('problem.'):]] = value
            else:
                settings[key] = value
            label += '_{0}-{1}'.format(key.replace('problem.', ''), _label_value(value))
        run = RunConfig(name=config.name, problem=problem, solver=config.solver, settings=settings,
                        gap=config.gap, output=dict(config.output), label=label)
        runs.append(run.validate())
    return runs


def load_config(path):
    """
    Expanded runs of a JSON config. A run summary written by execute_run is accepted as well
    and replays its run.
    """
    try:
        document = read_summary(path)
    except (OSError, ValueError) as error:
        raise InvalidConfigError('cannot read config {0}: {1}'.format(path, error))
    if not isinstance(document, dict):
        raise InvalidConfigError('config {0} must hold a JSON object'.format(path))
    if 'config' in document:
        document = document['config']
    return expand_sweep(RunConfig.from_dict(document))


def worker_count():
    value = os.environ.get('CGM_VI_THREADS', '1')
    try:
        count = int(value)
    except ValueError:
        raise InvalidConfigError('CGM_VI_THREADS must be a positive integer, got {0!r}'.format(value))
    if count < 1:
        raise InvalidConfigError('CGM_VI_THREADS must be a positive integer, got {0!r}'.format(value))
    return count


def execute_run(run, output_dir=None, problem=None):
    """
    Execute one expanded run, streaming its trace CSV and writing its summary JSON.

    :param run: validated RunConfig without sweep
    :param output_dir: overrides run.output["directory"]
    :param problem: instance built from run.problem, built here when None
    :return: (summary dict, one-row overview DataFrame)
    """
    if problem is None:
        problem = build_problem(run.problem)
    config = run.solver_config()
    gap_kind = run.gap or metrics.default_gap_kind(problem)
    gap_fn = None
    if gap_kind is not None:
        gap_kind, gap_fn = metrics.gap_evaluator(problem, gap_kind)
    directory = output_dir or run.output.get('directory', 'results')
    label = run.run_label
    trace_path = os.path.join(directory, label + '_trace.csv')
    summary_path = os.path.join(directory, label + '_summary.json')
    x0 = solver.initial_point(problem, config)
    start = time.perf_counter()
    with TraceWriter(trace_path) as writer:
        if run.solver == 'cgm':
            output, trace = solver.cgm_run(problem, config, x0=x0, callback=writer, gap_fn=gap_fn)
        elif run.solver == 'pgm':
            output, trace = baselines.pgm_run(problem, baselines.oracle_for(problem), config.eta, config.T,
                                              averaging=config.averaging or 'uniform', x0=x0, seed=config.seed,
                                              callback=writer, gap_fn=gap_fn)
        else:
            output, trace = baselines.gda_run(problem, config.eta, config.T, x0=x0, seed=config.seed,
                                              callback=writer, gap_fn=gap_fn)
    wall_time = time.perf_counter() - start
    iterate_kind = 'last' if trace.averaging == 'last' else 'average'
    report = metrics.GapReport(gap_value=gap_fn(output) if gap_fn else float('nan'), gap_kind=gap_kind,
                               feasibility=metrics.feasibility(problem, output), iterate_kind=iterate_kind)
    if problem.dim <= TRAJECTORY_MAX_DIM:
        trajectory = pd.DataFrame(trace.iterates, columns=['x{0}'.format(i) for i in range(problem.dim)])
        trajectory.insert(0, 't', np.arange(trace.T + 1))
        trajectory.to_csv(os.path.join(directory, label + '_iterates.csv'), index=False)
    summary = {'name': label,
               'solver': run.solver,
               'problem': problem.descriptor(),
               'T': trace.T,
               'alpha': trace.alpha,
               'averaging': trace.averaging,
               'gap_kind': gap_kind,
               'iterate_kind': iterate_kind,
               'initial_gap': gap_fn(x0) if gap_fn else None,
               'initial_feasibility': metrics.feasibility(problem, x0),
               'final_gap': report.gap_value,
               'final_feasibility': report.feasibility,
               'peak_feasibility': float(np.max(trace.feasibilities[1:])),
               'wall_time': wall_time,
               'trace': trace_path,
               'output': output,
               'config': run.to_dict()}
    write_summary(summary_path, summary)
    logger.info('%s: gap %.4g (%s) feasibility %.3e in %.2fs', label, report.gap_value, gap_kind,
                report.feasibility, wall_time)
    overview = metrics.summarize_run(label, problem, trace, report, wall_time=wall_time)
    overview['peak_feasibility'] = summary['peak_feasibility']
    return summary, overview


def _report_error(error, label=None):
    where = '' if label is None else ' in {0}'.format(label)
    print('{0}{1}: {2}'.format(type(error).__name__, where, error), file=sys.stderr)


def _prepare(run):
    """Instance of a run; generator and gap-kind errors surface here as configuration errors."""
    problem = build_problem(run.problem)
    if run.gap is not None:
        metrics.gap_evaluator(problem, run.gap)
    return problem


def cmd_run(path, output_dir=None):
    """
    Run every configuration of a config file.

    :return: exit code, 0 on success, 2 for config errors, 1 for solver errors
    """
    try:
        runs = load_config(path)
        n_jobs = worker_count()
        instances = [_prepare(run) for run in runs]
    except (InvalidConfigError, InvalidArgumentError) as error:
        _report_error(error)
        return 2
    try:
        results = Parallel(n_jobs=min(n_jobs, len(runs)))(
            delayed(execute_run)(run, output_dir, problem) for run, problem in zip(runs, instances))
    except InvalidConfigError as error:
        _report_error(error)
        return 2
    except CGMError as error:
        _report_error(error)
        return 1
    if len(results) > 1:
        directory = output_dir or runs[0].output.get('directory', 'results')
        overview = pd.concat([row for _, row in results], ignore_index=True)
        overview.to_csv(os.path.join(directory, runs[0].name + '_runs.csv'), index=False)
    for summary, _ in results:
        print('{0}: final gap {1:.4g}, final feasibility {2:.3e}'.format(
            summary['name'], summary['final_gap'], summary['final_feasibility']))
    return 0


def parse_sweep_rates(document):
    unknown = sorted(set(document) - set(SWEEP_RATE_FIELDS))
    if unknown:
        raise InvalidConfigError('unknown sweep-rates field(s): {0}'.format(', '.join(unknown)))
    for key in ('name', 'problem', 'seeds', 'T', 'theorem'):
        if key not in document:
            raise InvalidConfigError('sweep-rates config needs "{0}"'.format(key))
    for key in ('seeds', 'T'):
        if not isinstance(document[key], list) or not document[key]:
            raise InvalidConfigError('{0} must be a nonempty list'.format(key))
    if len(set(document['T'])) < 3:
        raise InvalidConfigError('T needs at least three distinct horizons for a rate fit')
    if document['theorem'] not in THEOREMS:
        raise InvalidConfigError('theorem must be one of {0}'.format(', '.join(THEOREMS)))
    band = document.get('expected_slope')
    if band is not None and (not isinstance(band, list) or len(band) != 2 or not band[0] < band[1]):
        raise InvalidConfigError('expected_slope must be a [lower, upper] pair')
    if not isinstance(document['problem'], dict) or document['problem'].get('name') not in PROBLEMS:
        raise InvalidConfigError('problem.name must be one of {0}'.format(', '.join(sorted(PROBLEMS))))
    for T in document['T']:
        solver.SolverConfig.from_dict(dict(document.get('settings', {}), T=T,
                                           schedule=THEOREMS[document['theorem']])).validate()
    return document


def _rate_point(seed, problem, settings, gap):
    config = solver.SolverConfig.from_dict(settings).validate()
    gap_kind, gap_fn = metrics.gap_evaluator(problem, gap)
    output, trace = solver.cgm_run(problem, config)
    return {'seed': seed, 'T': config.T, 'gap_kind': gap_kind, 'gap': gap_fn(output),
            'feasibility': metrics.feasibility(problem, output)}


def rate_instances(document):
    """One instance per seed of a sweep-rates document, with its gap kind checked."""
    instances = {}
    for seed in document['seeds']:
        problem = build_problem(dict(document['problem'], seed=seed))
        metrics.gap_evaluator(problem, document.get('gap'))
        instances[seed] = problem
    return instances


def run_rate_sweep(document, n_jobs=1, instances=None):
    """
    Gap of the CGM output for every (seed, T) under a theorem schedule and the fitted
    log-log slope per seed.

    :return: (points DataFrame, fits DataFrame)
    """
    schedule = THEOREMS[document['theorem']]
    if instances is None:
        instances = rate_instances(document)
    jobs = []
    for seed in document['seeds']:
        for T in document['T']:
            settings = dict(document.get('settings', {}), T=T, schedule=schedule, seed=seed)
            jobs.append((seed, instances[seed], settings))
    points = Parallel(n_jobs=min(n_jobs, len(jobs)))(
        delayed(_rate_point)(seed, problem, settings, document.get('gap')) for seed, problem, settings in jobs)
    points = pd.DataFrame(points)
    band = document.get('expected_slope')
    fits = []
    for seed, group in points.groupby('seed', sort=True):
        fit = metrics.rate_fit(group['T'].values, group['gap'].values)
        row = asdict(fit)
        row['seed'] = seed
        row['passed'] = True if band is None else bool(band[0] <= fit.slope <= band[1])
        fits.append(row)
    return points, pd.DataFrame(fits)


def cmd_sweep_rates(path, output_dir=None):
    """
    Fit empirical rates over a T-sweep.

    :return: exit code, 0 when every slope is in the expected band, 1 otherwise or on solver errors,
        2 for malformed configs
    """
    try:
        document = read_summary(path)
    except (OSError, ValueError) as error:
        _report_error(InvalidConfigError('cannot read config {0}: {1}'.format(path, error)))
        return 2
    try:
        if not isinstance(document, dict):
            raise InvalidConfigError('config {0} must hold a JSON object'.format(path))
        document = parse_sweep_rates(document)
        n_jobs = worker_count()
        instances = rate_instances(document)
    except (InvalidConfigError, InvalidArgumentError) as error:
        _report_error(error)
        return 2
    try:
        points, fits = run_rate_sweep(document, n_jobs, instances)
    except InvalidConfigError as error:
        _report_error(error)
        return 2
    except CGMError as error:
        _report_error(error)
        return 1
    directory = output_dir or document.get('output', {}).get('directory', 'results')
    os.makedirs(directory, exist_ok=True)
    points.to_csv(os.path.join(directory, document['name'] + '_points.csv'), index=False)
    fits.to_csv(os.path.join(directory, document['name'] + '_rates.csv'), index=False)
    passed = bool(fits['passed'].all())
    write_summary(os.path.join(directory, document['name'] + '_rates.json'),
                  {'name': document['name'], 'passed': passed, 'expected_slope': document.get('expected_slope'),
                   'fits': fits.to_dict(orient='records'), 'config': document})
    for row in fits.itertuples():
        print('seed {0}: slope {1:.3f} [{2:.3f}, {3:.3f}] {4}'.format(
            row.seed, row.slope, row.lower, row.upper, 'ok' if row.passed else 'outside band'))
    return 0 if passed else 1
