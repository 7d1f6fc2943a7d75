# -*- coding: utf-8 -*-
"""
Exceptions raised by the solvers, generators and run drivers.

Every error carries an ``iteration`` attribute which the iteration loops fill
in before re-raising, so the CLI can report where a run failed.
"""


class CGMError(Exception):

    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration

    def __str__(self):
        message = super().__str__()
        if self.iteration is None:
            return message
        return '{0} (iteration {1})'.format(message, self.iteration)


class InvalidArgumentError(CGMError, ValueError):
    pass


class InvalidConfigError(CGMError, ValueError):
    pass


class InfeasibleLinearizationError(CGMError, ArithmeticError):
    """An active constraint has a vanishing gradient while violated."""


class InfeasibleSubproblemError(CGMError, ArithmeticError):
    """The velocity polytope is empty; carries the Farkas multipliers if known."""

    def __init__(self, message, certificate=None, iteration=None):
        super().__init__(message, iteration=iteration)
        self.certificate = certificate


class MaxIterationsError(CGMError, RuntimeError):
    """The direction solver hit its iteration cap; carries the best iterate."""

    def __init__(self, message, v=None, delta=None, iteration=None):
        super().__init__(message, iteration=iteration)
        self.v = v
        self.delta = delta
