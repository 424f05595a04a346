"""Spectra of weighted LCM matrices via their Euler-product factorization."""

from .errors import (AccuracyError, ArithSpecError, CapacityError, FitError, InputError, NumericError,
                     ParameterError, RangeError)
from .numtheory import SpectralParams

__version__ = "0.1.0"

__all__ = [
    "AccuracyError",
    "ArithSpecError",
    "CapacityError",
    "FitError",
    "InputError",
    "NumericError",
    "ParameterError",
    "RangeError",
    "SpectralParams",
    "__version__",
]
