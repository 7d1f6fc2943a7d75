# -*- coding: utf-8 -*-
"""
Command line interface.

    python -m cgmvi run configs/quad_game_small.json
    python -m cgmvi validate --filter lemma1
    python -m cgmvi sweep-rates configs/sweep_quadratic_game.json

Exit codes: 0 success, 1 solver error or failed check, 2 invalid configuration.
"""

import argparse
import logging
import sys

import numpy as np

from cgmvi.experiments import cmd_run, cmd_sweep_rates
from cgmvi.validation import cmd_validate

np.set_printoptions(suppress=True, precision=4)


def get_args(argv=None):
    ap = argparse.ArgumentParser(prog='cgmvi', description='constrained gradient method for variational inequalities')
    ap.add_argument("-v", "--verbose", action='store_true', help="log every iteration")
    commands = ap.add_subparsers(dest='command')
    commands.required = True

    run = commands.add_parser('run', help="execute the runs of a JSON config")
    run.add_argument("config", help="path to the run config (json) or to a run summary to replay")
    run.add_argument("-o", "--output-dir", required=False, help="overrides the output directory of the config")

    validate = commands.add_parser('validate', help="run the self-check suite")
    validate.add_argument("-f", "--filter", required=False, help="only checks whose name contains this text")
    validate.add_argument("-r", "--report", required=False, help="machine-readable report (json)")

    sweep = commands.add_parser('sweep-rates', help="fit empirical rates over a sweep of horizons")
    sweep.add_argument("config", help="path to the sweep config (json)")
    sweep.add_argument("-o", "--output-dir", required=False, help="overrides the output directory of the config")
    args = vars(ap.parse_args(argv))
    return args


def main(argv=None):
    args = get_args(argv)
    logging.basicConfig(level=logging.DEBUG if args['verbose'] else logging.INFO,
                        format='%(asctime)s %(name)s %(levelname)s: %(message)s', stream=sys.stderr)
    if args['command'] == 'run':
        return cmd_run(args['config'], args['output_dir'])
    if args['command'] == 'validate':
        return cmd_validate(args['filter'], args['report'])
    return cmd_sweep_rates(args['config'], args['output_dir'])


if __name__ == '__main__':
    sys.exit(main())
