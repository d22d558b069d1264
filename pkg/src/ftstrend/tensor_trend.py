"""Penalized tensor-product spline trend surfaces for gridded curve series.

The observed data are an ``m x N`` matrix of curve evaluations: column n is
the n-th curve sampled on a common grid, with rescaled time ``t = n / N``.
The trend surface ``T(s, t) = nu(s)' Theta eta(t)`` is fitted by penalized
least squares with separate second-derivative roughness penalties in the
two coordinates, solved in the compact ``k1 k2`` coefficient dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .splines import BSplineBasis, eval_basis, gram_and_penalty, make_basis

__all__ = [
    "GridFunctionSeries",
    "TrendFit",
    "TrendFitError",
    "fit_trend",
    "eval_trend",
    "trend_time_derivative",
    "forecast_trend",
    "detrend",
]


class TrendFitError(ValueError):
    """Raised when the penalized system cannot be assembled or solved."""


@dataclass(frozen=True)
class GridFunctionSeries:
    """A functional time series observed on a common grid.

    Attributes
    ----------
    values : np.ndarray
        ``m x N`` matrix; column n holds curve n evaluated on ``s_grid``.
    s_grid : np.ndarray
        Strictly increasing within-curve grid of length m.
    t_grid : np.ndarray
        Strictly increasing rescaled times in ``(0, 1]``, length N; entry
        n is ``n / N`` for regularly observed series.
    s_domain : tuple
        Endpoints ``(lo, hi)`` of the curve domain; contains ``s_grid``.
    s_labels, t_labels : tuple of str, optional
        Original file labels, kept only for round-tripping datasets.
    """

    values: np.ndarray
    s_grid: np.ndarray
    t_grid: np.ndarray
    s_domain: tuple
    s_labels: tuple = field(default=None, compare=False)
    t_labels: tuple = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        s_grid = np.asarray(self.s_grid, dtype=np.float64)
        t_grid = np.asarray(self.t_grid, dtype=np.float64)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "s_grid", s_grid)
        object.__setattr__(self, "t_grid", t_grid)
        object.__setattr__(self, "s_domain", (float(self.s_domain[0]), float(self.s_domain[1])))
        if values.ndim != 2:
            raise ValueError("values must be an m x N matrix")
        if values.shape != (s_grid.size, t_grid.size):
            raise ValueError(
                f"values shape {values.shape} does not match grids "
                f"({s_grid.size} x {t_grid.size})"
            )
        if not np.all(np.isfinite(values)):
            raise ValueError("values contain non-finite entries")
        if np.any(np.diff(s_grid) <= 0):
            raise ValueError("s_grid must be strictly increasing")
        lo, hi = self.s_domain
        if s_grid[0] < lo or s_grid[-1] > hi:
            raise ValueError("s_grid lies outside s_domain")
        if np.any(np.diff(t_grid) <= 0) or t_grid[0] <= 0 or t_grid[-1] > 1:
            raise ValueError("t_grid must be strictly increasing within (0, 1]")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def N(self) -> int:
        return self.values.shape[1]

    def with_values(self, values: np.ndarray) -> "GridFunctionSeries":
        """Copy of this series with the value matrix replaced."""
        return GridFunctionSeries(
            values, self.s_grid, self.t_grid, self.s_domain, self.s_labels, self.t_labels
        )


@dataclass(frozen=True)
class TrendFit:
    """Fitted tensor-product trend surface.

    ``theta`` is the k1 x k2 coefficient matrix of the surface
    ``nu(s)' theta eta(t)``; ``edf`` is the trace of the influence
    operator (reporting only). ``ridge_used`` is nonzero only when the
    factorization needed the diagonal fallback.
    """

    theta: np.ndarray
    basis_s: BSplineBasis
    basis_t: BSplineBasis
    lambda_s: float
    lambda_t: float
    edf: float
    ridge_used: float = 0.0

    def surface(self, s, t) -> np.ndarray:
        """Evaluate the fitted surface on the grid ``s x t``."""
        return eval_trend(self, s, t)


def _marginal_matrices(basis: BSplineBasis):
    mats = gram_and_penalty(basis)
    return mats.gram, mats.penalty


def fit_trend(
    data: GridFunctionSeries,
    k1: int,
    k2: int,
    lambda_s: float,
    lambda_t: float,
    *,
    order: int = 4,
) -> TrendFit:
    """Fit the penalized tensor-product trend surface.

    Solves the compact normal equations

        [Z'Z kron V'V + lambda_s J_eta kron P_s + lambda_t P_t kron J_nu]
            vec(theta) = vec(V' Y Z)

    with V, Z the basis evaluations on the s- and t-grids, J the Gram
    matrices and P the second-derivative penalties. Vectorization is
    column-major throughout, so ``vec(V theta Z') = (Z kron V) vec(theta)``.
    The ``m N x k1 k2`` design matrix is never materialized.

    Parameters
    ----------
    data : GridFunctionSeries
    k1, k2 : int
        Number of basis functions in s and in t.
    lambda_s, lambda_t : float
        Nonnegative roughness penalties on the s- and t-curvature.
    order : int
        Spline order of both marginal bases (default cubic).
    """
    if not (np.isfinite(lambda_s) and np.isfinite(lambda_t)):
        raise TrendFitError("smoothing parameters must be finite")
    if lambda_s < 0 or lambda_t < 0:
        raise TrendFitError("smoothing parameters must be nonnegative")
    if k1 * k2 > data.m * data.N:
        raise TrendFitError(
            f"k1*k2 = {k1 * k2} exceeds the number of observations {data.m * data.N}"
        )

    basis_s = make_basis(data.s_domain[0], data.s_domain[1], k1, order)
    basis_t = make_basis(0.0, 1.0, k2, order)
    V = eval_basis(basis_s, data.s_grid)
    Z = eval_basis(basis_t, data.t_grid)
    J_nu, P_s = _marginal_matrices(basis_s)
    J_eta, P_t = _marginal_matrices(basis_t)

    A = np.kron(Z.T @ Z, V.T @ V)
    P = lambda_s * np.kron(J_eta, P_s) + lambda_t * np.kron(P_t, J_nu)
    rhs = (V.T @ data.values @ Z).ravel(order="F")

    # Jacobi scaling keeps the factorization accurate when the penalties
    # dwarf the data term (lambda up to ~1e12); without it huge-lambda
    # solves lose the null-space components to roundoff.
    system = A + P
    d_scale = 1.0 / np.sqrt(np.diag(system))
    scaled = d_scale[:, None] * system * d_scale[None, :]
    ridge_used = 0.0
    try:
        cho = linalg.cho_factor(scaled, lower=True)
    except linalg.LinAlgError:
        if lambda_s == 0.0 and lambda_t == 0.0:
            rank = np.linalg.matrix_rank(A)
            raise TrendFitError(
                "unpenalized normal equations are singular: rank "
                f"{rank} < {k1 * k2}; increase the grids, reduce k1/k2, "
                "or use positive smoothing parameters"
            ) from None
        ridge_used = 1e-10 * np.trace(scaled) / (k1 * k2)
        try:
            cho = linalg.cho_factor(scaled + ridge_used * np.eye(k1 * k2), lower=True)
        except linalg.LinAlgError as exc:
            raise TrendFitError(f"penalized system not positive definite: {exc}") from None

    theta_vec = d_scale * linalg.cho_solve(cho, d_scale * rhs)
    theta = theta_vec.reshape((k1, k2), order="F")
    edf = float(np.trace(linalg.cho_solve(cho, d_scale[:, None] * A * d_scale[None, :])))

    return TrendFit(
        theta=theta,
        basis_s=basis_s,
        basis_t=basis_t,
        lambda_s=float(lambda_s),
        lambda_t=float(lambda_t),
        edf=edf,
        ridge_used=ridge_used,
    )


def eval_trend(fit: TrendFit, s, t) -> np.ndarray:
    """Fitted surface values on the grid ``s x t`` (shape ``|s| x |t|``)."""
    V = eval_basis(fit.basis_s, s)
    Z = eval_basis(fit.basis_t, t)
    return V @ fit.theta @ Z.T


def trend_time_derivative(fit: TrendFit, s, t: float) -> np.ndarray:
    """Time slope ``d/dt T(s, t)`` at a single time, for each point of s."""
    V = eval_basis(fit.basis_s, s)
    dZ = eval_basis(fit.basis_t, [t], deriv=1)
    return (V @ fit.theta @ dZ.T).ravel()


def forecast_trend(fit: TrendFit, s, N: int, h: int, *, step: str = "paper") -> np.ndarray:
    """Iterated first-order trend forecast at the points `s`.

    Step j adds ``slope(s) / (N + j)`` to the previous level, starting from
    the fitted surface at the end of the observation window (t = 1), with
    the slope frozen at t = 1 for every step. ``step="uniform"`` uses the
    plain rescaled-time increment ``1 / N`` instead of ``1 / (N + j)``.

    Returns
    -------
    np.ndarray of shape ``(len(s), h)``; column j-1 is the j-step forecast.
    """
    if h < 1:
        raise ValueError("forecast horizon must be >= 1")
    if step not in ("paper", "uniform"):
        raise ValueError(f"unknown step rule {step!r}")
    t_end = fit.basis_t.domain_hi
    level = eval_trend(fit, s, [t_end]).ravel()
    slope = trend_time_derivative(fit, s, t_end)
    steps = np.arange(1, h + 1)
    if step == "paper":
        factors = np.cumsum(1.0 / (N + steps))
    else:
        factors = steps / float(N)
    return level[:, None] + slope[:, None] * factors[None, :]


def detrend(data: GridFunctionSeries, fit: TrendFit) -> GridFunctionSeries:
    """Residual series after removing the fitted trend at the grid points."""
    if (fit.basis_s.domain_lo, fit.basis_s.domain_hi) != data.s_domain:
        raise ValueError(
            f"fit domain [{fit.basis_s.domain_lo}, {fit.basis_s.domain_hi}] "
            f"does not match data domain {data.s_domain}"
        )
    residuals = data.values - eval_trend(fit, data.s_grid, data.t_grid)
    return data.with_values(residuals)
