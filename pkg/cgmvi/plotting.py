# -*- coding: utf-8 -*-
"""
Figures of run outputs: 2-D trajectories over the feasible region and convergence curves.
Needs the optional ``plot`` extra (matplotlib).
"""
from collections import OrderedDict

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

cmap = [(213/255.0, 94/255.0, 0/255.0), (2/255.0, 158/255.0, 115/255.0), (0/255.0, 114/255.0, 178/255.0),
        (204/255.0, 121/255.0, 167/255.0), (230/255.0, 159/255.0, 0/255.0)]


def _load(trajectory):
    if isinstance(trajectory, str):
        frame = pd.read_csv(trajectory)
        return frame[[column for column in frame.columns if column != 't']].values
    return np.asarray(trajectory, dtype=float)


def plot_trajectories(problem, trajectories, output_file=None, title=None, extent=1.5, fontsize=14):
    """
    Plots the iterates of several 2-D runs over the shaded feasible region.
    :param problem: 2-D ProblemInstance
    :param trajectories: mapping label -> (T+1) x 2 array of iterates or path of an iterates CSV
    :param output_file: image written to disk when given
    :param title: title of the plot
    :param extent: half width of the plotted square
    :param fontsize: font size of labels and legend
    :return: the matplotlib figure
    """
    fig, ax = plt.subplots(figsize=(8, 8))
    grid = np.linspace(-extent, extent, 301)
    X, Y = np.meshgrid(grid, grid)
    values = np.array([[np.max(problem.constraint_values(np.array([x, y]))) for x in grid] for y in grid])
    ax.contourf(X, Y, values, levels=[values.min() - 1.0, 0.0], colors=['lightgrey'], alpha=0.6)
    ax.contour(X, Y, values, levels=[0.0], colors=['black'], linewidths=1.0)

    for i, (label, trajectory) in enumerate(trajectories.items()):
        iterates = _load(trajectory)
        color = cmap[i % len(cmap)]
        ax.plot(iterates[:, 0], iterates[:, 1], '-o', color=color, ms=3, lw=1.2,
                label=r'$\alpha$ = ' + str(label))
    first = _load(next(iter(trajectories.values())))
    ax.plot(first[0, 0], first[0, 1], 'ks', ms=8, label='start')
    if problem.reference_solution is not None:
        ax.plot(problem.reference_solution[0], problem.reference_solution[1], 'k*', ms=14, label='solution')

    handles, labels = ax.get_legend_handles_labels()
    by_label = OrderedDict(zip(labels, handles))
    ax.legend(by_label.values(), by_label.keys(), fontsize=fontsize, loc='upper left')
    ax.set_xlim([-extent, extent])
    ax.set_ylim([-extent, extent])
    ax.set_aspect('equal')
    ax.set_xlabel('x', fontsize=fontsize)
    ax.set_ylabel('y', fontsize=fontsize)
    ax.set_title(title or problem.name, fontsize=fontsize)
    if output_file is not None:
        plt.savefig(output_file, dpi=300, bbox_inches='tight')
        plt.close(fig)
    return fig


def plot_convergence(traces, output_file=None, title=None, fontsize=14):
    """
    Gap and constraint violation of the reported iterate against the iteration count, log scale.
    :param traces: mapping label -> trace CSV path or DataFrame with columns t, gap, feasibility
    :param output_file: image written to disk when given
    :param title: figure title
    :param fontsize: font size
    :return: the matplotlib figure
    """
    fig, (ax_gap, ax_feas) = plt.subplots(1, 2, figsize=(14, 6))
    for i, (label, trace) in enumerate(traces.items()):
        frame = pd.read_csv(trace) if isinstance(trace, str) else trace
        color = cmap[i % len(cmap)]
        ax_gap.semilogy(frame['t'], frame['gap'], color=color, label=label)
        # exactly feasible points vanish on a log axis
        ax_feas.semilogy(frame['t'], frame['feasibility'].where(frame['feasibility'] > 0), color=color,
                         label=label)
    ax_gap.set_ylabel('optimality gap', fontsize=fontsize)
    ax_feas.set_ylabel('constraint violation', fontsize=fontsize)
    for ax in (ax_gap, ax_feas):
        ax.set_xlabel('iteration', fontsize=fontsize)
        ax.tick_params(axis='both', labelsize=fontsize)
        ax.legend(fontsize=fontsize)
    if title is not None:
        fig.suptitle(title, fontsize=fontsize)
    if output_file is not None:
        plt.savefig(output_file, dpi=300, bbox_inches='tight')
        plt.close(fig)
    return fig
