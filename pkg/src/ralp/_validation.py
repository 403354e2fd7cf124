"""Input validation helpers shared by the estimators and functional API.

sklearn's ``check_array`` rejects complex input, so the received-signal
checks live here instead.
"""

import numbers

import numpy as np


def is_prime(n):
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def check_int(value, name, *, min_value=None, max_value=None):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if min_value is not None and value < min_value:
        raise ValueError(f"{name} must be >= {min_value}, got {value}")
    if max_value is not None and value > max_value:
        raise ValueError(f"{name} must be <= {max_value}, got {value}")
    return value


def check_positive(value, name, *, allow_zero=False):
    value = float(value)
    if not np.isfinite(value):
        raise ValueError(f"{name} must be finite, got {value}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return value


def check_probability(value, name, *, open_interval=True):
    value = float(value)
    ok = 0.0 < value < 1.0 if open_interval else 0.0 <= value <= 1.0
    if not ok:
        raise ValueError(f"{name} must lie in (0, 1), got {value}")
    return value


def check_thresholds(tau1, tau2):
    tau1, tau2 = float(tau1), float(tau2)
    if not (0.0 < tau1 < tau2):
        raise ValueError(f"thresholds must satisfy 0 < tau1 < tau2, got ({tau1}, {tau2})")
    return tau1, tau2


def check_received(y, n=None, *, allow_batch=True):
    """Return ``y`` as a complex128 array of shape (..., M, N).

    Parameters
    ----------
    y : array_like
        One received matrix or a stack of them.
    n : int, optional
        Expected sequence length (last axis).
    allow_batch : bool
        Whether leading batch axes are accepted.
    """
    y = np.asarray(y)
    if y.dtype.kind not in "biufc":
        raise TypeError(f"received signal must be numeric, got dtype {y.dtype}")
    y = y.astype(np.complex128, copy=False)
    if y.ndim < 2 or (not allow_batch and y.ndim != 2):
        raise ValueError(f"received signal must be an M x N matrix, got shape {y.shape}")
    if n is not None and y.shape[-1] != n:
        raise ValueError(f"received signal has {y.shape[-1]} columns, pool length is {n}")
    if not np.all(np.isfinite(y)):
        raise ValueError("received signal contains non-finite entries")
    return y


def check_index_set(indices, upper, name):
    """Validate a collection of distinct integer indices in [0, upper)."""
    indices = [int(i) for i in indices]
    out = sorted(set(indices))
    if len(out) != len(indices):
        raise ValueError(f"{name} contains duplicate indices")
    if out and (out[0] < 0 or out[-1] >= upper):
        raise IndexError(f"{name} indices must lie in [0, {upper}), got {out}")
    return out
