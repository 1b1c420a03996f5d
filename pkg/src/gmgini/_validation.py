"""Input checks shared by the estimator classes."""
from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array

from .specfun import DomainError


def check_positive_sample(X, *, min_samples=2, name="X"):
    """Return a 1-d float array of strictly positive finite observations.

    Accepts a 1-d array or a single-column 2-d array, the layout scikit-learn
    uses for one feature.
    """
    arr = np.asarray(X)
    if arr.ndim == 2 and arr.shape[1] != 1:
        raise DomainError(f"{name} must hold one feature, got shape {arr.shape}")
    try:
        arr = check_array(
            arr.reshape(-1, 1) if arr.ndim == 1 else arr,
            dtype=np.float64,
            ensure_2d=True,
            ensure_min_samples=min_samples,
        )
    except ValueError as exc:
        raise DomainError(f"{name}: {exc}") from None
    x = arr[:, 0]
    if np.any(x <= 0):
        raise DomainError(f"{name} must be strictly positive")
    return x


def check_positive_int(value, name, minimum=1):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise DomainError(f"{name} must be an integer, got {value!r}")
    if value < minimum:
        raise DomainError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
