# -*- coding: utf-8 -*-
"""
Streaming trace CSV and run summary JSON.
"""

import json
import os

import numpy as np
import pandas as pd

TRACE_COLUMNS = ['t', 'feasibility', 'gap', 'v_norm', 'active_count', 'delta']


class TraceWriter(object):
    """
    Append-only CSV writer, one row per iteration, flushed after every row so that
    an interrupted run leaves a readable prefix.
    """

    def __init__(self, path):
        self.path = path
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        self.fh = open(path, 'w', newline='')
        self.fh.write(','.join(TRACE_COLUMNS) + '\n')
        self.fh.flush()
        self.rows = 0

    def __call__(self, event):
        row = pd.DataFrame([[event.t, event.feasibility, event.gap, event.v_norm, event.active_count, event.delta]],
                           columns=TRACE_COLUMNS)
        row.to_csv(self.fh, header=False, index=False, float_format='%.10g')
        self.fh.flush()
        self.rows += 1

    def close(self):
        if not self.fh.closed:
            self.fh.close()

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        self.close()
        return False


def _to_builtin(value):
    if isinstance(value, dict):
        return {key: _to_builtin(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_builtin(item) for item in value]
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    return value


def write_summary(path, summary):
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w') as fh:
        json.dump(_to_builtin(summary), fh, indent=2)


def read_summary(path):
    with open(path) as fh:
        return json.load(fh)
