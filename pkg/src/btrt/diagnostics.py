"""Scoring and convergence diagnostics: RMSE, predictive metrics, effective
sample size by batch means, and log-likelihood trace summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "rmse",
    "rmspe_pearson",
    "ess",
    "ess_columns",
    "TraceSummary",
    "trace_summary",
    "EssSummary",
    "FitReport",
    "format_report",
]


def rmse(est, truth) -> float:
    """Root mean squared error over all cells of two equal-shape tensors."""
    est = np.asarray(est, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if est.shape != truth.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {truth.shape}")
    diff = est - truth
    return float(np.sqrt(np.mean(diff * diff)))


def rmspe_pearson(pred, actual):
    """Root mean squared predictive error and Pearson correlation.

    Returns ``(rmspe, pearson)``; ``pearson`` is ``None`` when either input
    has zero variance (the correlation is undefined there).
    """
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    actual = np.asarray(actual, dtype=np.float64).reshape(-1)
    if pred.shape != actual.shape:
        raise ValueError("prediction/actual length mismatch")
    if pred.size < 2:
        raise ValueError("need at least two values")
    err = pred - actual
    rmspe = float(np.sqrt(np.mean(err * err)))
    pc = pred - pred.mean()
    ac = actual - actual.mean()
    denom = math.sqrt(float(pc @ pc) * float(ac @ ac))
    if denom == 0.0:
        return rmspe, None
    return rmspe, float(pc @ ac) / denom


def _batch_variance(chain2d: np.ndarray, batch_size: int) -> np.ndarray:
    """Batch-means estimate of the long-run variance, per column."""
    s = chain2d.shape[0]
    n_batches = s // batch_size
    trimmed = chain2d[s - n_batches * batch_size :]
    means = trimmed.reshape(n_batches, batch_size, -1).mean(axis=1)
    grand = trimmed.mean(axis=0)
    dev = means - grand
    return batch_size * np.sum(dev * dev, axis=0) / (n_batches - 1)


def ess_columns(chains: np.ndarray) -> np.ndarray:
    """Effective sample size per column of an (S, k) array of chains.

    ESS = S * sample variance / batch-means long-run variance, with batch
    size ``floor(sqrt(S))``, clipped to [1, S].
    """
    chains = np.asarray(chains, dtype=np.float64)
    if chains.ndim == 1:
        chains = chains[:, None]
    s = chains.shape[0]
    if s < 100:
        raise ValueError(f"chain too short for batch-means ESS (S={s} < 100)")
    batch_size = int(math.isqrt(s))
    long_run = _batch_variance(chains, batch_size)
    sample_var = chains.var(axis=0, ddof=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = s * sample_var / long_run
    out[~np.isfinite(out)] = 1.0  # constant chains carry no information
    return np.clip(out, 1.0, float(s))


def ess(chain) -> float:
    """Effective sample size of a single chain (batch-means estimator)."""
    return float(ess_columns(np.asarray(chain, dtype=np.float64))[0])


@dataclass
class TraceSummary:
    post_mean: float
    slope: float
    slope_se: float
    split_means: tuple
    split_z: float
    ess: float
    flags: list

    @property
    def trending(self) -> bool:
        return "slope" in self.flags


def trace_summary(trace, burn_in: int) -> TraceSummary:
    """Convergence summary of a log-likelihood trace after burn-in.

    Fits a least-squares line to the post-burn-in segment and flags a trend
    when the slope exceeds twice its standard error; the standard errors here
    are widened by ``sqrt(S / ESS)`` because MCMC traces are autocorrelated
    and the i.i.d. formulas would flag stationary chains.  Also compares the
    two halves of the segment.
    """
    trace = np.asarray(trace, dtype=np.float64).reshape(-1)
    burn_in = int(burn_in)
    if burn_in < 0 or trace.shape[0] <= burn_in:
        raise ValueError(
            f"trace length {trace.shape[0]} must exceed burn-in {burn_in}"
        )
    seg = trace[burn_in:]
    s = seg.shape[0]
    flags: list = []
    if s < 100:
        return TraceSummary(float(seg.mean()), 0.0, 0.0,
                            (float(seg.mean()), float(seg.mean())), 0.0,
                            float(s), ["too-short"])
    eff = ess(seg)
    infl = math.sqrt(s / eff)
    t = np.arange(s, dtype=np.float64)
    t -= t.mean()
    denom = float(t @ t)
    slope = float(t @ (seg - seg.mean())) / denom
    resid = seg - seg.mean() - slope * t
    resid_var = float(resid @ resid) / max(s - 2, 1)
    slope_se = math.sqrt(resid_var / denom) * infl
    if slope_se > 0 and abs(slope) > 2.0 * slope_se:
        flags.append("slope")
    half = s // 2
    m1, m2 = float(seg[:half].mean()), float(seg[half:].mean())
    pooled = seg.var(ddof=1) * (1.0 / half + 1.0 / (s - half)) * infl**2
    split_z = (m1 - m2) / math.sqrt(pooled) if pooled > 0 else 0.0
    if abs(split_z) > 3.0:
        flags.append("split-half")
    return TraceSummary(float(seg.mean()), slope, slope_se, (m1, m2),
                        float(split_z), eff, flags)


@dataclass
class EssSummary:
    minimum: float
    median: float
    maximum: float


@dataclass
class FitReport:
    """Per-fit diagnostics bundle emitted by the estimator and the CLI."""

    rmspe: float | None = None
    pearson: float | None = None
    rmse_coef: float | None = None
    coef_ess: EssSummary | None = None
    loglik_trace: np.ndarray | None = None
    trace: TraceSummary | None = None
    dic: float | None = None
    warnings: list = field(default_factory=list)


def _fmt(x) -> str:
    if x is None:
        return "missing"
    return repr(float(x))


def format_report(report: FitReport) -> str:
    lines = ["[report]"]
    lines.append(f"rmspe={_fmt(report.rmspe)}")
    lines.append(f"pearson={_fmt(report.pearson)}")
    if report.rmse_coef is not None:
        lines.append(f"rmse_coef={_fmt(report.rmse_coef)}")
    if report.dic is not None:
        lines.append(f"dic={_fmt(report.dic)}")
    if report.coef_ess is not None:
        lines.append(f"coef_ess_min={_fmt(report.coef_ess.minimum)}")
        lines.append(f"coef_ess_median={_fmt(report.coef_ess.median)}")
        lines.append(f"coef_ess_max={_fmt(report.coef_ess.maximum)}")
    if report.trace is not None:
        t = report.trace
        lines.append(f"loglik_post_mean={_fmt(t.post_mean)}")
        lines.append(f"loglik_slope={_fmt(t.slope)}")
        lines.append(f"loglik_slope_se={_fmt(t.slope_se)}")
        lines.append(f"loglik_split_z={_fmt(t.split_z)}")
        lines.append(f"loglik_ess={_fmt(t.ess)}")
        lines.append(f"trace_flags={','.join(t.flags) if t.flags else 'none'}")
    lines.append("[warnings]")
    for w in report.warnings:
        lines.append(w)
    if not report.warnings:
        lines.append("none")
    return "\n".join(lines) + "\n"
