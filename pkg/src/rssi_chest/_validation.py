"""Input validation helpers shared by the estimators and the simulation code."""

import numbers

import numpy as np


class DimensionError(ValueError):
    """Raised when an array or index does not match the system dimensions."""


def check_positive(value, name):
    if not isinstance(value, numbers.Real) or isinstance(value, bool):
        raise TypeError(f"{name} must be a real number, got {type(value).__name__}")
    if not np.isfinite(value) or value <= 0:
        raise ValueError(f"{name} must be strictly positive and finite, got {value!r}")
    return float(value)


def check_count(value, name, minimum=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)


def check_index(index, size, name="user"):
    if isinstance(index, bool) or not isinstance(index, numbers.Integral):
        raise TypeError(f"{name} index must be an integer")
    if not 0 <= index < size:
        raise DimensionError(f"{name} index {index} out of range for size {size}")
    return int(index)


def check_complex_array(values, n_antennas=None, ndim=None, name="observations"):
    """Coerce ``values`` to a finite complex128 array.

    The trailing axis is the antenna axis; its length is checked against
    ``n_antennas`` when given.
    """
    arr = np.asarray(values)
    if arr.dtype.kind not in "biufc":
        raise TypeError(f"{name} must be numeric, got dtype {arr.dtype}")
    arr = arr.astype(np.complex128, copy=False)
    if ndim is not None and arr.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-D, got shape {arr.shape}")
    if arr.ndim == 0:
        raise DimensionError(f"{name} must have an antenna axis")
    if n_antennas is not None and arr.shape[-1] != n_antennas:
        raise DimensionError(
            f"{name} has {arr.shape[-1]} antennas, expected {n_antennas}"
        )
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_nonnegative_array(values, shape=None, name="values", allow_nan=False):
    arr = np.asarray(values, dtype=np.float64)
    if shape is not None and arr.shape != tuple(shape):
        raise DimensionError(f"{name} must have shape {tuple(shape)}, got {arr.shape}")
    finite = arr[~np.isnan(arr)] if allow_nan else arr
    if not allow_nan and np.any(np.isnan(arr)):
        raise ValueError(f"{name} contains NaN")
    if np.any(~np.isfinite(finite)) or np.any(finite < 0):
        raise ValueError(f"{name} must be finite and non-negative")
    return arr
