"""Curve forecasting via functional PCA scores, with and without a trend.

The with-trend route removes a REML-tuned tensor-product trend first,
projects the residual curves onto functional principal components, models
each score series with an AIC-selected autoregression, and adds the
extrapolated trend back. The without-trend route applies the same
score-modeling machinery to the raw curves, first-differencing any score
series whose lag-one autocorrelation indicates a unit root.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._util import trapezoid_weights
from .smoothing import joint_lambda_scales, select_lambdas
from .splines import make_basis
from .tensor_trend import GridFunctionSeries, detrend, fit_trend, forecast_trend

__all__ = [
    "FPCAModel",
    "ScoreModel",
    "ForecastConfig",
    "ForecastComparison",
    "fpca",
    "fit_score_model",
    "forecast_scores",
    "forecast_with_trend",
    "forecast_without_trend",
    "compare_forecasts",
]

# Lag-one autocorrelation above this triggers first differencing of a score
# series in the without-trend pipeline.
_UNIT_ROOT_ACF = 0.95


@dataclass(frozen=True)
class FPCAModel:
    """Functional principal components of a curve sample.

    Components are orthonormal in the grid-weighted (trapezoidal) inner
    product; eigenvalues are nonincreasing.
    """

    mean_curve: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray
    r: int
    s_grid: np.ndarray
    weights: np.ndarray

    def project(self, values: np.ndarray) -> np.ndarray:
        """Score matrix (N x r) of curves given as an m x N matrix."""
        centered = values - self.mean_curve[:, None]
        return centered.T @ (self.weights[:, None] * self.components)

    def reconstruct(self, scores: np.ndarray) -> np.ndarray:
        """Curves (m x N) from an N x r score matrix."""
        return self.mean_curve[:, None] + self.components @ scores.T


def fpca(series: GridFunctionSeries, r: int) -> FPCAModel:
    """Eigen-decomposition of the grid-weighted empirical covariance."""
    if r < 1 or r > min(series.m, series.N):
        raise ValueError(f"r must be in [1, {min(series.m, series.N)}], got {r}")
    w = trapezoid_weights(series.s_grid)
    mean_curve = series.values.mean(axis=1)
    centered = series.values - mean_curve[:, None]
    cov = centered @ centered.T / series.N
    sw = np.sqrt(w)
    sym = sw[:, None] * cov * sw[None, :]
    eigvals, eigvecs = np.linalg.eigh(0.5 * (sym + sym.T))
    order = np.argsort(eigvals)[::-1]
    eigvals = eigvals[order]
    if eigvals[r - 1] <= 1e-12 * max(eigvals[0], 1e-300):
        raise ValueError(f"requested r = {r} exceeds the numerical rank of the covariance")
    components = eigvecs[:, order[:r]] / sw[:, None]
    return FPCAModel(
        mean_curve=mean_curve,
        components=components,
        eigenvalues=np.clip(eigvals[:r], 0.0, None),
        r=r,
        s_grid=series.s_grid,
        weights=w,
    )


@dataclass(frozen=True)
class ScoreModel:
    """AR(p) model of one score series, order selected by AIC.

    ``spectral_radius`` is the companion-matrix radius of the fitted
    coefficients; values at or above one flag near-unit-root fits without
    rejecting them. A zero ``innovation_variance`` flags a degenerate
    (constant) series.
    """

    order: int
    coefficients: np.ndarray
    intercept: float
    innovation_variance: float
    aic: float

    @property
    def spectral_radius(self) -> float:
        if self.order == 0:
            return 0.0
        companion = np.zeros((self.order, self.order))
        companion[0, :] = self.coefficients
        if self.order > 1:
            companion[1:, :-1] = np.eye(self.order - 1)
        return float(np.max(np.abs(np.linalg.eigvals(companion))))


def fit_score_model(scores, p_max: int = 5) -> ScoreModel:
    """Fit AR(p) by least squares for p = 0..p_max and keep the AIC winner.

    All candidate orders are fitted on the common sample that conditions
    on the first ``p_max`` observations, so their AIC values
    ``M log(RSS / M) + 2 (p + 1)`` are comparable.
    """
    y = np.asarray(scores, dtype=np.float64)
    if y.ndim != 1:
        raise ValueError("scores must be one-dimensional")
    if y.size <= p_max + 2:
        raise ValueError(f"series of length {y.size} too short for p_max = {p_max}")
    window = y[p_max:]
    M = window.size
    if np.ptp(y) == 0.0:
        return ScoreModel(0, np.empty(0), float(y[0]), 0.0, float("-inf"))

    best = None
    for p in range(p_max + 1):
        columns = [np.ones(M)]
        for lag in range(1, p + 1):
            columns.append(y[p_max - lag : y.size - lag])
        X = np.column_stack(columns)
        coef, _, _, _ = np.linalg.lstsq(X, window, rcond=None)
        rss = float(np.sum((window - X @ coef) ** 2))
        with np.errstate(divide="ignore"):
            aic = M * np.log(rss / M) + 2.0 * (p + 1)
        if best is None or aic < best[0]:
            best = (aic, p, coef, rss)
    aic, p, coef, rss = best
    return ScoreModel(
        order=p,
        coefficients=coef[1:],
        intercept=float(coef[0]),
        innovation_variance=rss / M,
        aic=float(aic),
    )


def forecast_scores(model: ScoreModel, history, h: int) -> np.ndarray:
    """Iterated h-step forecast of a fitted score model."""
    history = list(np.asarray(history, dtype=np.float64))
    out = np.empty(h)
    for j in range(h):
        value = model.intercept
        for lag in range(1, model.order + 1):
            value += model.coefficients[lag - 1] * history[-lag]
        history.append(value)
        out[j] = value
    return out


def _lag1_autocorrelation(y: np.ndarray) -> float:
    centered = y - y.mean()
    denom = float(centered @ centered)
    if denom == 0.0:
        return 0.0
    return float(centered[:-1] @ centered[1:]) / denom


@dataclass(frozen=True)
class ForecastConfig:
    """Shared knobs of the two forecasting pipelines."""

    k1: int = 10
    k2: int = 15
    r: int = 4
    p_max: int = 5
    lambda_s: float = None
    lambda_t: float = None


def _with_trend(data: GridFunctionSeries, cfg: ForecastConfig, h: int):
    lam_s, lam_t = cfg.lambda_s, cfg.lambda_t
    if lam_s is None or lam_t is None:
        basis_s = make_basis(data.s_domain[0], data.s_domain[1], cfg.k1)
        basis_t = make_basis(0.0, 1.0, cfg.k2)
        scale_s, scale_t = joint_lambda_scales(data)
        sel_s, sel_t = select_lambdas(
            data, basis_s, basis_t, scale_s=scale_s, scale_t=scale_t
        )
        lam_s = sel_s if lam_s is None else lam_s
        lam_t = sel_t if lam_t is None else lam_t
    fit = fit_trend(data, cfg.k1, cfg.k2, lam_s, lam_t)
    residuals = detrend(data, fit)
    model = fpca(residuals, cfg.r)
    scores = model.project(residuals.values)
    score_forecasts = np.empty((h, cfg.r))
    for j in range(cfg.r):
        sm = fit_score_model(scores[:, j], cfg.p_max)
        score_forecasts[:, j] = forecast_scores(sm, scores[:, j], h)
    noise_part = model.reconstruct(score_forecasts)
    trend_part = forecast_trend(fit, data.s_grid, data.N, h)
    info = {"lambda_s": lam_s, "lambda_t": lam_t, "edf": fit.edf}
    return trend_part + noise_part, info


def forecast_with_trend(
    data: GridFunctionSeries,
    k1: int = 10,
    k2: int = 15,
    r: int = 4,
    p_max: int = 5,
    h: int = 1,
    *,
    lambda_s: float = None,
    lambda_t: float = None,
) -> np.ndarray:
    """h-step curve forecast with the trend modeled and extrapolated.

    Smoothing parameters are selected by marginal REML unless given.
    Returns an ``m x h`` matrix of forecast curves.
    """
    cfg = ForecastConfig(k1=k1, k2=k2, r=r, p_max=p_max, lambda_s=lambda_s, lambda_t=lambda_t)
    forecast, _ = _with_trend(data, cfg, h)
    return forecast


def forecast_without_trend(
    data: GridFunctionSeries, r: int = 4, p_max: int = 5, h: int = 1
) -> np.ndarray:
    """h-step curve forecast ignoring any trend component.

    Scores of the raw curves are modeled directly; a score series whose
    lag-one autocorrelation exceeds 0.95 is first-differenced before the
    autoregression and the forecasts are integrated back.
    """
    model = fpca(data, r)
    scores = model.project(data.values)
    score_forecasts = np.empty((h, r))
    for j in range(r):
        series = scores[:, j]
        if _lag1_autocorrelation(series) > _UNIT_ROOT_ACF:
            diffs = np.diff(series)
            sm = fit_score_model(diffs, p_max)
            dhat = forecast_scores(sm, diffs, h)
            score_forecasts[:, j] = series[-1] + np.cumsum(dhat)
        else:
            sm = fit_score_model(series, p_max)
            score_forecasts[:, j] = forecast_scores(sm, series, h)
    return model.reconstruct(score_forecasts)


@dataclass(frozen=True)
class ForecastComparison:
    """Holdout comparison of the two pipelines.

    ``l1_with`` and ``l1_without`` sum the grid-trapezoid L1 distances to
    the held-out curves over the horizon.
    """

    horizon: int
    truth: np.ndarray
    with_trend: np.ndarray
    without_trend: np.ndarray
    l1_with: float
    l1_without: float
    details: dict = None


def _l1_distance(truth: np.ndarray, forecast: np.ndarray, s_grid: np.ndarray) -> float:
    w = trapezoid_weights(s_grid)
    return float(np.sum(w @ np.abs(truth - forecast)))


def compare_forecasts(
    data: GridFunctionSeries, holdout: int, config: ForecastConfig = None
) -> ForecastComparison:
    """Hold out the last curves and score both pipelines against them."""
    cfg = config or ForecastConfig()
    if holdout < 1:
        raise ValueError("holdout must be >= 1")
    n_head = data.N - holdout
    if n_head <= max(cfg.k2, cfg.p_max + 2, cfg.r):
        raise ValueError(f"too few curves ({data.N}) for holdout {holdout}")
    head = GridFunctionSeries(
        data.values[:, :n_head],
        data.s_grid,
        np.arange(1, n_head + 1) / n_head,
        data.s_domain,
    )
    truth = data.values[:, n_head:]
    with_fc, info = _with_trend(head, cfg, holdout)
    without_fc = forecast_without_trend(head, cfg.r, cfg.p_max, holdout)
    return ForecastComparison(
        horizon=holdout,
        truth=truth,
        with_trend=with_fc,
        without_trend=without_fc,
        l1_with=_l1_distance(truth, with_fc, data.s_grid),
        l1_without=_l1_distance(truth, without_fc, data.s_grid),
        details=info,
    )
