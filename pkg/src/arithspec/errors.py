"""Exception hierarchy.

Each class carries the CLI exit code it maps to.
"""


class ArithSpecError(Exception):
    exit_code = 1


class ParameterError(ArithSpecError, ValueError):
    """Parameters outside the admissible regime or out of range."""

    exit_code = 2


class InputError(ArithSpecError, ValueError):
    exit_code = 2


class RangeError(ArithSpecError, ValueError):
    """Argument outside the domain where a quantity is defined or certified."""

    exit_code = 2


class CapacityError(ArithSpecError):
    exit_code = 3


class AccuracyError(ArithSpecError):
    """A requested accuracy could not be met; ``achieved`` holds what was reached."""

    exit_code = 3

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class NumericError(ArithSpecError, ArithmeticError):
    exit_code = 1

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class FitError(ArithSpecError):
    exit_code = 1
