"""Input validation helpers shared by the estimators."""

import numpy as np
from sklearn.exceptions import NotFittedError

from .errors import DimensionMismatchError


def as_float_matrix(X, name="X"):
    """Coerce to a 2-D float64 array, rejecting empties and non-finite values."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={X.ndim}")
    if X.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


def as_float_vector(x, name="x"):
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError(f"{name} is empty")
    return x


def check_fitted(estimator, attribute):
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"{type(estimator).__name__} is not fitted; call fit() first"
        )


def check_dim(X, dim, name="X"):
    if X.shape[1] != dim:
        raise DimensionMismatchError(
            f"{name} has {X.shape[1]} columns, model expects {dim}"
        )
