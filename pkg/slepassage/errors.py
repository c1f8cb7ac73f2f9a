"""Exception and warning types raised by slepassage."""


class SlePassageError(Exception):
    """Base class for all slepassage errors."""


class DomainError(SlePassageError, ValueError):
    """An argument violates a documented precondition.

    The message always names the violated precondition.
    """


class ConvergenceError(SlePassageError, ArithmeticError):
    """A series or a refinement sequence failed to reach its tolerance."""


class DivergenceError(SlePassageError, ArithmeticError):
    """The requested value is infinite (e.g. 2F1 at x = 1 with c - a - b <= 0)."""


class InvariantViolationError(SlePassageError, ArithmeticError):
    """A computed value left its admissible range beyond float tolerance."""


class SchemaError(SlePassageError, ValueError):
    """A persisted record file is malformed or has an unknown schema version."""


class ExpansionAccuracyWarning(UserWarning):
    """A truncated small-parameter expansion is evaluated outside its range."""


class MethodDisagreementWarning(UserWarning):
    """Two independent integration methods disagree beyond their error bars."""
