"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class CostCalcError(Exception):
    """Base class for all domain errors raised by the package."""


class UndefinedName(CostCalcError):
    pass


class ArityMismatch(CostCalcError):
    pass


class IllegalAction(CostCalcError):
    pass


class UnknownLabel(CostCalcError):
    pass


class InvalidWeights(CostCalcError):
    pass


class ReservedName(CostCalcError):
    pass


class InvalidOverride(CostCalcError):
    pass


class AlphabetClash(CostCalcError):
    pass


class BudgetExhausted(CostCalcError):
    """Raised when a search loop runs out of iterations without reaching a goal.

    The best solution seen so far (possibly none) travels with the exception.
    """

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class ParseError(CostCalcError):
    def __init__(self, message: str, span=None):
        self.message = message
        self.span = span
        if span is not None:
            message = f"{span.line}:{span.column}: {message}"
        super().__init__(message)
