"""Input validation helpers shared by the estimator, sampler, and IO layers."""

from __future__ import annotations

import numpy as np

__all__ = [
    "check_tensor_stack",
    "check_response",
    "check_covariates",
    "check_ranks",
    "check_positive",
    "check_spd",
]


def check_tensor_stack(X) -> np.ndarray:
    """Validate a stack of tensor covariates, shape (n, p_0, ..., p_{D-1})."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim < 2:
        raise ValueError(
            f"tensor covariates must have shape (n, p_0, ...); got ndim={X.ndim}"
        )
    if any(p < 1 for p in X.shape[1:]):
        raise ValueError(f"tensor dims must all be >= 1, got {X.shape[1:]}")
    if not np.all(np.isfinite(X)):
        raise ValueError("tensor covariates contain non-finite values")
    return X


def check_response(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if y.shape[0] != n:
        raise ValueError(f"response has {y.shape[0]} values but n={n} subjects")
    if not np.all(np.isfinite(y)):
        raise ValueError("response contains non-finite values")
    return y


def check_covariates(eta, n: int) -> np.ndarray:
    """Scalar covariates, (n, q); ``None`` means q = 0."""
    if eta is None:
        return np.zeros((n, 0))
    eta = np.asarray(eta, dtype=np.float64)
    if eta.ndim == 1:
        eta = eta[:, None]
    if eta.ndim != 2 or eta.shape[0] != n:
        raise ValueError(
            f"covariates must be (n, q) with n={n}; got shape {eta.shape}"
        )
    if not np.all(np.isfinite(eta)):
        raise ValueError("covariates contain non-finite values")
    return eta


def check_ranks(ranks, order: int) -> tuple:
    ranks = tuple(int(r) for r in np.atleast_1d(ranks))
    if len(ranks) != order:
        raise ValueError(f"need {order} ranks (one per mode), got {len(ranks)}")
    if any(r < 1 for r in ranks):
        raise ValueError(f"ranks must all be >= 1, got {ranks}")
    return ranks


def check_positive(name: str, value) -> float:
    value = float(value)
    if not value > 0.0 or not np.isfinite(value):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")
    return value


def check_spd(name: str, matrix) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"{name} must be a square matrix")
    if not np.allclose(matrix, matrix.T):
        raise ValueError(f"{name} must be symmetric")
    try:
        np.linalg.cholesky(matrix)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"{name} must be positive definite") from exc
    return matrix
