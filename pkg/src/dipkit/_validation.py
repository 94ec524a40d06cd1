"""Exceptions and small input-checking helpers shared across the package."""
import numbers

import numpy as np


class DipkitError(Exception):
    """Base class for all errors raised by dipkit."""


class InvalidInputError(DipkitError, ValueError):
    """Input violates a documented precondition."""


class OutOfRangeError(DipkitError):
    """Query lies outside the domain covered by a look-up table."""


class FitError(DipkitError):
    """A curve fit did not converge or the data carries no sigmoid structure."""


class NoGradientError(DipkitError):
    """No modal triangle is available, so the Dip has no usable gradient."""


class DegenerateProjectionError(NoGradientError):
    """All projected values coincide at the modal triangle."""


def as_sample(values, name="sample"):
    """Return ``values`` as a finite 1-D float64 array with at least one entry."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {x.shape}")
    if x.size == 0:
        raise InvalidInputError(f"{name} is empty")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return x


def as_matrix(data, name="data"):
    """Return ``data`` as a finite 2-D float64 array; 1-D input becomes one column."""
    X = np.asarray(data, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise InvalidInputError(f"{name} must be two-dimensional, got shape {X.shape}")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise InvalidInputError(f"{name} is empty")
    if not np.all(np.isfinite(X)):
        raise InvalidInputError(f"{name} contains non-finite values")
    return X


def as_axis(axis, d, name="axis"):
    """Return ``axis`` as a finite float64 vector of length ``d`` with nonzero norm."""
    a = np.asarray(axis, dtype=np.float64).reshape(-1)
    if a.shape[0] != d:
        raise InvalidInputError(f"{name} has {a.shape[0]} entries but data has {d} features")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name} contains non-finite values")
    if not np.any(a != 0.0):
        raise InvalidInputError(f"{name} must have nonzero norm")
    return a


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise InvalidInputError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise InvalidInputError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_open_unit(value, name):
    v = float(value)
    if not 0.0 < v < 1.0:
        raise InvalidInputError(f"{name} must lie in (0, 1), got {value}")
    return v
