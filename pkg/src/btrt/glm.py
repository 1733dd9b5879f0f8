"""Two-step voxelwise linear-model baseline with FDR control.

Step one regresses the response on the scalar covariates alone (ordinary
least squares, intercept included) and keeps the residuals; step two fits a
no-intercept simple regression of those residuals on each voxel separately
and tests each slope with a two-sided t-test on n-1 degrees of freedom.
Rejection is decided by the Benjamini-Hochberg step-up rule, and the
coefficient map keeps the fitted slope at rejected voxels and zero elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .validation import check_covariates, check_response, check_tensor_stack

__all__ = [
    "residualize",
    "voxelwise_fit",
    "bh_adjust",
    "glm_coefficient_map",
    "VoxelResults",
]


def residualize(y, eta):
    """Remove the scalar-covariate fit from the response.

    Returns ``(residuals, coef)`` where ``coef`` holds the OLS coefficients
    of the design ``[1, eta]`` (the intercept is always included so the
    residuals are centered).
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = y.shape[0]
    eta = check_covariates(eta, n)
    design = np.column_stack([np.ones(n), eta])
    if n <= design.shape[1]:
        raise ValueError(
            f"need more subjects than covariates (+1 intercept): n={n}, q={eta.shape[1]}"
        )
    coef, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        raise ValueError("covariate matrix is rank deficient")
    return y - design @ coef, coef


@dataclass
class VoxelResults:
    """Per-voxel slope estimates and test results (arrays share the tensor dims)."""

    estimate: np.ndarray
    stderr: np.ndarray
    pvalue: np.ndarray
    zero_variance: np.ndarray  # flagged voxels with constant covariate
    dof: int
    rejected: np.ndarray | None = None


def voxelwise_fit(resid_y, X) -> VoxelResults:
    """No-intercept simple regression of the residualized response on each voxel.

    Zero-variance voxels get estimate 0 and p-value 1 (flagged) rather than
    an error, since masked or background cells are routine in image tensors.
    """
    X = check_tensor_stack(X)
    n = X.shape[0]
    dims = X.shape[1:]
    y = check_response(resid_y, n)
    if n < 3:
        raise ValueError(f"need at least 3 subjects, got {n}")
    flat = X.reshape(n, -1)
    sxx = np.einsum("nv,nv->v", flat, flat)
    sxy = flat.T @ y
    syy = float(y @ y)
    zero_var = sxx <= 0.0
    safe_sxx = np.where(zero_var, 1.0, sxx)
    slope = np.where(zero_var, 0.0, sxy / safe_sxx)
    dof = n - 1
    ssr = np.maximum(syy - slope * sxy, 0.0)
    sigma2 = ssr / dof
    stderr = np.sqrt(np.where(zero_var, np.inf, sigma2 / safe_sxx))
    with np.errstate(divide="ignore", invalid="ignore"):
        tval = np.divide(slope, stderr, out=np.zeros_like(slope), where=stderr > 0)
    tval[(stderr == 0) & (slope != 0)] = np.inf  # exact fit
    pvalue = 2.0 * stats.t.sf(np.abs(tval), dof)
    pvalue = np.where(zero_var, 1.0, pvalue)
    pvalue = np.clip(pvalue, 0.0, 1.0)
    return VoxelResults(
        estimate=slope.reshape(dims),
        stderr=stderr.reshape(dims),
        pvalue=pvalue.reshape(dims),
        zero_variance=zero_var.reshape(dims),
        dof=dof,
    )


def bh_adjust(pvalues, q: float) -> np.ndarray:
    """Benjamini-Hochberg step-up rule at target false discovery rate ``q``.

    Sort the p-values ascending, find the largest k with
    ``p_(k) <= k * q / m``, and reject everything at or below ``p_(k)``.
    Returns a boolean rejection mask aligned with the input.
    """
    p = np.asarray(pvalues, dtype=np.float64).reshape(-1)
    if p.size == 0:
        raise ValueError("empty p-value input")
    if not 0.0 < q < 1.0:
        raise ValueError(f"target FDR must be in (0, 1), got {q!r}")
    m = p.size
    order = np.argsort(p, kind="stable")
    sorted_p = p[order]
    thresholds = q * np.arange(1, m + 1) / m
    satisfied = np.nonzero(sorted_p <= thresholds)[0]
    if satisfied.size == 0:
        return np.zeros(p.shape, dtype=bool)
    crit = sorted_p[satisfied[-1]]
    mask = p <= crit
    return mask.reshape(np.shape(pvalues))


def glm_coefficient_map(X, y, eta=None, fdr_q: float = 0.05):
    """Full two-step baseline: residualize, fit voxels, correct, zero the rest.

    Returns ``(coefficient_map, VoxelResults)`` with ``rejected`` filled in.
    """
    X = check_tensor_stack(X)
    y = check_response(y, X.shape[0])
    eta = check_covariates(eta, X.shape[0])
    resid, _ = residualize(y, eta)
    results = voxelwise_fit(resid, X)
    rejected = bh_adjust(results.pvalue.reshape(-1), fdr_q).reshape(results.pvalue.shape)
    results.rejected = rejected
    coef_map = np.where(rejected, results.estimate, 0.0)
    return coef_map, results
