"""Competitor trend estimators: parametric linear, kernel smoother, and
per-coordinate penalized spline.

All three operate row-wise on the training s-grid. The linear estimator
works in integer time units n = 1..N (its centering formula requires
them); the kernel and per-row spline estimators use rescaled time in
(0, 1]. Callers comparing against rescaled-time surfaces convert with
``t = n / N`` at the comparison layer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .splines import BSplineBasis, eval_basis, gram_and_penalty, make_basis
from .tensor_trend import GridFunctionSeries

__all__ = [
    "BaselineFit",
    "fit_linear",
    "fit_kernel",
    "fit_naive",
    "eval_baseline",
    "baseline_values",
]

_GCV_LOG10_GRID = np.linspace(-12.0, 12.0, 25)


@dataclass(frozen=True)
class BaselineFit:
    """Fitted baseline estimator; payload fields depend on `kind`.

    kind "Lin": ``mu`` and ``slope`` on the s-grid (integer time units).
    kind "Ker": ``bandwidth``, retained ``train_values`` and ``train_t``.
    kind "Naiv": per-row coefficients over a shared time basis, and the
    row-wise GCV-selected penalties.
    """

    kind: str
    s_grid: np.ndarray
    mu: np.ndarray = None
    slope: np.ndarray = None
    bandwidth: float = None
    train_values: np.ndarray = None
    train_t: np.ndarray = None
    coeffs: np.ndarray = None
    basis_t: BSplineBasis = None
    row_lambdas: np.ndarray = None


def fit_linear(data: GridFunctionSeries) -> BaselineFit:
    """Per-row least-squares line in integer time.

    slope(s_i) = sum_n (n - (N+1)/2) Y_n(s_i) / sum_n (n - (N+1)/2)^2 and
    mu(s_i) = mean_n Y_n(s_i) - slope(s_i) (N+1)/2, so the fitted trend at
    time n is ``mu + n slope``.
    """
    N = data.N
    if N < 2:
        raise ValueError("linear trend needs at least two curves")
    n = np.arange(1, N + 1, dtype=np.float64)
    centered = n - (N + 1) / 2.0
    s_N = float(centered @ centered)
    slope = data.values @ centered / s_N
    mu = data.values.mean(axis=1) - slope * (N + 1) / 2.0
    return BaselineFit(kind="Lin", s_grid=data.s_grid, mu=mu, slope=slope)


def _kernel_time_weights(train_t: np.ndarray, t, bandwidth: float) -> np.ndarray:
    """Gaussian kernel weights in the time coordinate, shape (N, |t|).

    The bivariate kernel's s-offset is zero along curves, so the weight
    for curve n at query time t reduces to K((t - t_n) / h) with K the
    standard Gaussian density in two dimensions.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    z = (t[None, :] - train_t[:, None]) / bandwidth
    return np.exp(-0.5 * z**2) / (2.0 * np.pi)


def fit_kernel(data: GridFunctionSeries, bandwidth_grid) -> BaselineFit:
    """Nadaraya-Watson smoother across curves with CV-selected bandwidth.

    The bandwidth is picked by leave-one-curve-out cross validation:
    each curve is predicted from all the others and the candidate with
    the smallest summed squared error wins. Candidates whose weights
    underflow to zero for some held-out curve are discarded; if every
    candidate degenerates this raises.
    """
    bandwidth_grid = np.asarray(bandwidth_grid, dtype=np.float64)
    if bandwidth_grid.size == 0 or np.any(bandwidth_grid <= 0):
        raise ValueError("bandwidth candidates must be positive")
    t = data.t_grid
    Y = data.values
    best_h, best_err = None, np.inf
    for h in bandwidth_grid:
        W = _kernel_time_weights(t, t, h)
        np.fill_diagonal(W, 0.0)
        totals = W.sum(axis=0)
        if np.any(totals == 0.0):
            continue
        pred = Y @ (W / totals[None, :])
        err = float(np.sum((Y - pred) ** 2))
        if err < best_err:
            best_h, best_err = float(h), err
    if best_h is None:
        raise ValueError(
            "all bandwidth candidates degenerate (zero leave-one-out weight sums)"
        )
    return BaselineFit(
        kind="Ker", s_grid=data.s_grid, bandwidth=best_h, train_values=Y, train_t=t
    )


def fit_naive(data: GridFunctionSeries, k2: int) -> BaselineFit:
    """Independent penalized spline in time for every grid row.

    Each row gets its own roughness penalty selected by generalized cross
    validation, ``GCV = N RSS / (N - tr H)^2``, over a 25-point grid of
    lambda from 1e-12 to 1e12. The time basis (k2 cubics on [0, 1]) is
    shared across rows.
    """
    if k2 >= data.N:
        raise ValueError(f"k2 ({k2}) must be below the number of curves ({data.N})")
    basis_t = make_basis(0.0, 1.0, k2)
    B = eval_basis(basis_t, data.t_grid)
    S = gram_and_penalty(basis_t).penalty
    BtB = B.T @ B
    N = data.N

    solvers = []
    for log10_lam in _GCV_LOG10_GRID:
        lam = 10.0 ** log10_lam
        cho = linalg.cho_factor(BtB + lam * S, lower=True)
        trace_h = float(np.trace(linalg.cho_solve(cho, BtB)))
        solvers.append((lam, cho, trace_h))

    coeffs = np.empty((data.m, k2))
    row_lambdas = np.empty(data.m)
    for i in range(data.m):
        y = data.values[i]
        Bty = B.T @ y
        best = (np.inf, None, None)
        for lam, cho, trace_h in solvers:
            theta = linalg.cho_solve(cho, Bty)
            rss = float(np.sum((y - B @ theta) ** 2))
            gcv = N * rss / (N - trace_h) ** 2
            if gcv < best[0]:
                best = (gcv, theta, lam)
        coeffs[i] = best[1]
        row_lambdas[i] = best[2]
    return BaselineFit(
        kind="Naiv", s_grid=data.s_grid, coeffs=coeffs, basis_t=basis_t, row_lambdas=row_lambdas
    )


def baseline_values(fit: BaselineFit, t) -> np.ndarray:
    """Fitted values for every training row at the given times.

    Times are in the fit's native convention: integer time for "Lin",
    rescaled time in [0, 1] for "Ker" and "Naiv". Returns ``m x |t|``.
    """
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if fit.kind == "Lin":
        return fit.mu[:, None] + fit.slope[:, None] * t[None, :]
    if fit.kind == "Ker":
        W = _kernel_time_weights(fit.train_t, t, fit.bandwidth)
        totals = W.sum(axis=0)
        if np.any(totals == 0.0):
            bad = t[totals == 0.0][0]
            raise ValueError(f"kernel weights underflow to zero at t = {bad!r}")
        return fit.train_values @ (W / totals[None, :])
    if fit.kind == "Naiv":
        return fit.coeffs @ eval_basis(fit.basis_t, t).T
    raise ValueError(f"unknown baseline kind {fit.kind!r}")


def eval_baseline(fit: BaselineFit, s_index: int, t: float) -> float:
    """Fitted trend value at training row `s_index` and time `t`."""
    if not 0 <= s_index < fit.s_grid.size:
        raise IndexError(f"s_index {s_index} out of range [0, {fit.s_grid.size})")
    return float(baseline_values(fit, [t])[s_index, 0])
