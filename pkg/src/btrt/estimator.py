"""Scalar-on-tensor regression estimator with a scikit-learn style API."""

from __future__ import annotations

import math
import warnings

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin

from .diagnostics import EssSummary, FitReport, ess_columns, rmspe_pearson, trace_summary
from .model import (
    Dataset,
    GibbsSampler,
    Hyperparams,
    PosteriorDraws,
    RunManifest,
    dic,
    posterior_predict,
)
from .rng import RngStream
from .validation import check_covariates, check_ranks, check_response, check_tensor_stack

__all__ = ["TuckerRegressor", "CollinearityWarning", "UnitRankWarning"]

_COLLINEARITY_SAMPLE = 1000
_COLLINEARITY_LIMIT = 0.999


class CollinearityWarning(UserWarning):
    """A scalar covariate is nearly collinear with a tensor cell, which makes
    the split between the tensor and scalar coefficients ill-determined."""


class UnitRankWarning(UserWarning):
    """A margin was given rank 1; in low-signal data this can destabilize the
    chain because those core cells scale against a single factor column."""


class TuckerRegressor(RegressorMixin, BaseEstimator):
    """Bayesian linear regression of a scalar response on a tensor covariate.

    The coefficient tensor is modeled through a low-rank Tucker composition
    whose factors and core carry adaptive shrinkage priors; inference is by
    Gibbs sampling.  ``fit`` runs one chain and retains post-burn-in draws of
    the composed coefficient tensor, the scalar-covariate coefficients, the
    observation variance, and the log-likelihood.

    Parameters
    ----------
    ranks:
        Tucker rank per tensor mode, e.g. ``(4, 4)`` for matrices.
    n_iter, burn_in, thin:
        Total sweeps, discarded prefix, and retention stride.
    random_state:
        Seed for the chain's random stream.
    hyper:
        Optional :class:`Hyperparams`; unset fields are resolved from the
        rank vector and tensor order at fit time.
    center_scale:
        Standardize the response before sampling and transform the retained
        draws back.  Recommended (and the default): the prior scales assume a
        standardized response.
    auto_raise_rank1:
        Raise any rank-1 margin to 2 instead of just warning about it.
    store_factors:
        Also retain per-draw factor matrices (the composed tensor is always
        retained; factors are not identified and are off by default).
    progress:
        Optional callable ``(iteration, loglik)`` invoked after every sweep.
    """

    def __init__(self, ranks=(2, 2), n_iter=11_000, burn_in=1_000, thin=1,
                 random_state=0, hyper=None, center_scale=True,
                 auto_raise_rank1=False, store_factors=False, progress=None):
        self.ranks = ranks
        self.n_iter = n_iter
        self.burn_in = burn_in
        self.thin = thin
        self.random_state = random_state
        self.hyper = hyper
        self.center_scale = center_scale
        self.auto_raise_rank1 = auto_raise_rank1
        self.store_factors = store_factors
        self.progress = progress

    # ------------------------------------------------------------------

    def fit(self, X, y, covariates=None):
        """Run the chain on a stack of tensors ``X`` of shape (n, p_0, ...).

        ``covariates`` is an optional (n, q) matrix entering the model
        linearly alongside the tensor term.
        """
        X = check_tensor_stack(X)
        y = check_response(y, X.shape[0])
        eta = check_covariates(covariates, X.shape[0])
        order = X.ndim - 1
        ranks = check_ranks(self.ranks, order)
        n_iter = int(self.n_iter)
        burn_in = int(self.burn_in)
        thin = int(self.thin)
        if burn_in < 0 or n_iter <= burn_in:
            raise ValueError(f"need 0 <= burn_in < n_iter, got {burn_in}, {n_iter}")
        if thin < 1:
            raise ValueError("thin must be >= 1")

        report_warnings: list = []
        ranks = self._vet_ranks(ranks, report_warnings)
        hyper = self._resolve_hyper(ranks, eta.shape[1])

        rng = RngStream(int(self.random_state), stream=0)
        self._preflight_collinearity(X, eta, rng.substream(1), report_warnings)

        if self.center_scale:
            y_mean = float(y.mean())
            y_scale = float(y.std())
            if y_scale == 0.0:
                y_scale = 1.0
            y_fit = (y - y_mean) / y_scale
        else:
            y_mean, y_scale = 0.0, 1.0
            y_fit = y

        data = Dataset(X=X, y=y_fit, eta=eta)
        sampler = GibbsSampler(data, ranks, hyper, rng)
        state = sampler.init_state()

        retained = (n_iter - burn_in) // thin
        n, dims, q = data.n, data.dims, data.q
        coef = np.empty((retained, *dims))
        gamma = np.empty((retained, q))
        sigma2 = np.empty(retained)
        loglik = np.empty(retained)
        tau = np.empty(retained)
        zs = np.empty(retained)
        fitted = np.empty((retained, n))
        factors = (
            [np.empty((retained, p, r)) for p, r in zip(dims, ranks)]
            if self.store_factors else None
        )
        trace = np.empty(n_iter)

        log_scale_adj = n * math.log(y_scale)
        keep = 0
        for it in range(1, n_iter + 1):
            ll = sampler.sweep(state) - log_scale_adj
            trace[it - 1] = ll
            if self.progress is not None:
                self.progress(it, ll)
            if it > burn_in and (it - burn_in - 1) % thin == 0 and keep < retained:
                coef[keep] = state.compose() * y_scale
                gamma[keep] = state.gamma * y_scale
                sigma2[keep] = state.sigma2 * y_scale**2
                loglik[keep] = ll
                tau[keep] = state.tau
                zs[keep] = state.z
                fitted[keep] = sampler.last_predictor * y_scale + y_mean
                if factors is not None:
                    for j in range(order):
                        factors[j][keep] = state.factors[j]
                keep += 1

        if sampler.clip_events:
            report_warnings.append(
                f"scale-clip: {sampler.clip_events} scale draws hit the "
                f"[1e-12, 1e12] guard range"
            )

        manifest = RunManifest(
            seed=int(self.random_state), stream=0, dims=tuple(dims),
            ranks=ranks, q=q, n=n, iterations=n_iter, burn_in=burn_in,
            thin=thin, retained=retained, center_scale=bool(self.center_scale),
            y_mean=y_mean, y_scale=y_scale, hyper=hyper,
            store_factors=bool(self.store_factors),
        )
        self.draws_ = PosteriorDraws(
            manifest=manifest, coef=coef, gamma=gamma, sigma2=sigma2,
            loglik=loglik, tau=tau, z=zs, factors=factors,
        )
        self.loglik_trace_ = trace
        self.dims_ = tuple(dims)
        self.ranks_ = ranks
        self.q_ = q
        self.hyper_ = hyper
        self.coef_tensor_ = coef.mean(axis=0)
        self.gamma_mean_ = gamma.mean(axis=0)
        self.dic_ = dic(self.draws_, X, y, eta)
        self.report_ = self._build_report(y, fitted, trace, burn_in, report_warnings)
        return self

    # ------------------------------------------------------------------

    def predict(self, X, covariates=None):
        """Posterior-predictive median response per subject."""
        self._check_fitted()
        return posterior_predict(self.draws_, X, covariates, quantiles=(0.5,))[:, 0]

    def predict_interval(self, X, covariates=None, level=0.95):
        """Median and central interval, shape (n, 3): low, median, high."""
        self._check_fitted()
        alpha = (1.0 - float(level)) / 2.0
        return posterior_predict(
            self.draws_, X, covariates, quantiles=(alpha, 0.5, 1.0 - alpha)
        )

    def gamma_interval(self, level=0.95):
        """Central credible interval for each scalar-covariate coefficient."""
        self._check_fitted()
        alpha = (1.0 - float(level)) / 2.0
        return np.quantile(self.draws_.gamma, [alpha, 0.5, 1.0 - alpha], axis=0).T

    # ------------------------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "draws_"):
            raise RuntimeError("estimator is not fitted")

    def _vet_ranks(self, ranks, report_warnings):
        if min(ranks) > 1:
            return ranks
        if self.auto_raise_rank1:
            raised = tuple(max(r, 2) for r in ranks)
            msg = (
                f"ranks {ranks} include a rank-1 margin; raised to {raised} "
                f"(rank-1 margins can destabilize the chain in low-signal data)"
            )
            warnings.warn(msg, UnitRankWarning, stacklevel=3)
            report_warnings.append("rank: " + msg)
            return raised
        msg = (
            f"ranks {ranks} include a rank-1 margin, which can destabilize the "
            f"chain in low-signal data; consider raising all ranks to >= 2 or "
            f"setting auto_raise_rank1=True"
        )
        warnings.warn(msg, UnitRankWarning, stacklevel=3)
        report_warnings.append("rank: " + msg)
        return ranks

    def _resolve_hyper(self, ranks, q):
        if self.hyper is None:
            return Hyperparams.resolve(ranks, q)
        if isinstance(self.hyper, Hyperparams):
            overrides = {
                k: v for k, v in vars(self.hyper).items() if v is not None
            }
        else:
            overrides = dict(self.hyper)
        return Hyperparams.resolve(ranks, q, **overrides)

    @staticmethod
    def _preflight_collinearity(X, eta, rng, report_warnings):
        n, q = eta.shape
        if q == 0 or n < 3:
            return
        flat = X.reshape(n, -1)
        n_cells = flat.shape[1]
        take = min(_COLLINEARITY_SAMPLE, n_cells)
        idx = rng.integers(0, n_cells, size=take)
        sample = flat[:, idx]
        sample = sample - sample.mean(axis=0)
        eta_c = eta - eta.mean(axis=0)
        s_norm = np.sqrt((sample**2).sum(axis=0))
        e_norm = np.sqrt((eta_c**2).sum(axis=0))
        ok = (s_norm > 0)[:, None] & (e_norm > 0)[None, :]
        corr = np.zeros((take, q))
        np.divide(
            sample.T @ eta_c, s_norm[:, None] * e_norm[None, :], out=corr, where=ok
        )
        worst = float(np.abs(corr).max(initial=0.0))
        if worst > _COLLINEARITY_LIMIT:
            msg = (
                f"a sampled tensor cell is nearly collinear with a scalar "
                f"covariate (|corr|={worst:.6f} > {_COLLINEARITY_LIMIT}); the "
                f"tensor/scalar coefficient split may not be identified"
            )
            warnings.warn(msg, CollinearityWarning, stacklevel=4)
            report_warnings.append("collinearity: " + msg)

    def _build_report(self, y, fitted, trace, burn_in, report_warnings):
        med = np.median(fitted, axis=0)
        if y.size >= 2:
            rmspe, pearson = rmspe_pearson(med, y)
        else:
            rmspe, pearson = None, None
        coef_flat = self.draws_.coef_matrix()
        if coef_flat.shape[0] >= 100:
            ess_vals = ess_columns(coef_flat)
            ess_summary = EssSummary(
                minimum=float(ess_vals.min()),
                median=float(np.median(ess_vals)),
                maximum=float(ess_vals.max()),
            )
        else:
            ess_summary = None
        summary = trace_summary(trace, burn_in)
        return FitReport(
            rmspe=rmspe, pearson=pearson, coef_ess=ess_summary,
            loglik_trace=trace, trace=summary, dic=self.dic_.dic,
            warnings=report_warnings,
        )
