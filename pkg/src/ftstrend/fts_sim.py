"""Synthetic functional time series: trend surfaces over an FAR(1) process.

Six closed-form trend surfaces on the unit square are combined with a
stationary functional autoregression of order one driven by independent
Brownian-motion innovations. The autoregression kernel is a Gaussian ridge
scaled so that its Hilbert-Schmidt norm (the operator-norm proxy) hits a
target below one, which keeps the process stationary.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from ._util import trapezoid_weights
from .tensor_trend import GridFunctionSeries

__all__ = [
    "TrendSurface",
    "FARProcessSpec",
    "brownian_path",
    "gaussian_ridge_kernel",
    "eval_trend_surface",
    "trend_surface_matrix",
    "calibrate_c1",
    "simulate_far1",
    "simulate_scenario",
]

_SIGMA_S = 0.3
_SIGMA_T = 0.4
_BUMP_NORM = 1.0 / (math.pi * _SIGMA_S * _SIGMA_T)


class TrendSurface(enum.Enum):
    """The six benchmark trend surfaces on [0, 1]^2."""

    T1 = "T1"
    T2 = "T2"
    T3 = "T3"
    T4 = "T4"
    T5 = "T5"
    T6 = "T6"

    def __call__(self, s, t):
        return eval_trend_surface(self, s, t)


def eval_trend_surface(surface_id: TrendSurface, s, t):
    """Closed-form trend value at (s, t); broadcasts over array inputs."""
    s = np.asarray(s, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    if surface_id is TrendSurface.T1:
        out = 2.0 * s + 30.0 * t
    elif surface_id is TrendSurface.T2:
        out = 25.0 * t * np.sin(2.0 * np.pi * s)
    elif surface_id is TrendSurface.T3:
        out = 20.0 * t**2 - 5.0 * t + 5.0 + 0.0 * s
    elif surface_id is TrendSurface.T4:
        out = 2.0 * (0.5 * s + 4.0 * t) ** 2
    elif surface_id is TrendSurface.T5:
        out = 28.0 * np.sin(2.0 * np.pi * t + s)
    elif surface_id is TrendSurface.T6:
        bump1 = 4.5 * _BUMP_NORM * np.exp(
            -((s - 0.2) ** 2) / _SIGMA_S**2 - ((t - 0.3) ** 2) / _SIGMA_T**2
        )
        bump2 = 2.7 * _BUMP_NORM * np.exp(
            -((s - 0.7) ** 2) / _SIGMA_S**2 - ((t - 0.8) ** 2) / _SIGMA_T**2
        )
        out = bump1 + bump2
    else:
        raise ValueError(f"unknown trend surface {surface_id!r}")
    return out if out.shape else float(out)


def trend_surface_matrix(surface_id: TrendSurface, s, t) -> np.ndarray:
    """Trend values on the tensor grid ``s x t`` (shape ``|s| x |t|``)."""
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    return eval_trend_surface(surface_id, s[:, None], t[None, :])


def gaussian_ridge_kernel(u, v):
    """The autoregression kernel ``exp(-(u^2 + v^2) / 2)``."""
    return np.exp(-(np.asarray(u) ** 2 + np.asarray(v) ** 2) / 2.0)


def brownian_path(rng: np.random.Generator, grid: np.ndarray) -> np.ndarray:
    """Standard Brownian motion sampled on `grid` (unit diffusion, W(0)=0)."""
    steps = np.empty_like(grid)
    steps[0] = grid[0]
    steps[1:] = np.diff(grid)
    return np.cumsum(rng.normal(0.0, np.sqrt(steps)))


@dataclass(frozen=True)
class FARProcessSpec:
    """Configuration of the stationary FAR(1) noise component.

    ``c1`` is the kernel scaling; leave it ``None`` to have it calibrated
    so that ``c1 * ||kernel||_HS`` (Hilbert-Schmidt norm over the unit
    square) equals ``target_norm``. ``noise`` draws one innovation curve
    per step and defaults to a Brownian path.
    """

    kernel: callable = gaussian_ridge_kernel
    target_norm: float = 0.7
    c1: float = None
    grid: np.ndarray = None
    burn_in: int = 200
    seed: int = 0
    noise: callable = brownian_path

    def __post_init__(self):
        grid = np.linspace(0.0, 1.0, 50) if self.grid is None else np.asarray(self.grid, np.float64)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be a strictly increasing 1-d array")
        object.__setattr__(self, "grid", grid)
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")


def _hilbert_schmidt_norm(kernel, nodes: int = 200) -> float:
    """HS norm of the kernel over [0, 1]^2 by tensor Gauss-Legendre."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w
    values = kernel(x[:, None], x[None, :]) ** 2
    return math.sqrt(float(w @ values @ w))


def calibrate_c1(spec: FARProcessSpec) -> float:
    """Kernel scaling constant achieving the spec's target operator norm."""
    if spec.c1 is not None:
        return float(spec.c1)
    if spec.target_norm == 0.0:
        return 0.0
    return spec.target_norm / _hilbert_schmidt_norm(spec.kernel)


def simulate_far1(spec: FARProcessSpec, N: int) -> GridFunctionSeries:
    """Simulate N curves of the stationary FAR(1) component (zero trend).

    The recursion starts from the zero curve, runs ``burn_in`` warm-up
    steps, and returns the next N curves. The autoregression integral is
    the trapezoidal sum over the grid. Deterministic given ``spec.seed``.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    grid = spec.grid
    c1 = calibrate_c1(spec)
    rng = np.random.default_rng(spec.seed)
    # K[i, j] = kernel(u_j, s_i): row i collects the integrand for output point s_i
    K = spec.kernel(grid[None, :], grid[:, None])
    w = trapezoid_weights(grid)
    x = np.zeros_like(grid)
    out = np.empty((grid.size, N))
    for step in range(spec.burn_in + N):
        x = c1 * (K @ (w * x)) + spec.noise(rng, grid)
        if step >= spec.burn_in:
            out[:, step - spec.burn_in] = x
    t_grid = np.arange(1, N + 1) / N
    return GridFunctionSeries(out, grid, t_grid, (grid[0], grid[-1]))


def simulate_scenario(surface_id: TrendSurface, spec: FARProcessSpec, N: int) -> GridFunctionSeries:
    """Simulate ``Y_n(s_i) = T(s_i, n/N) + X_n(s_i)`` for n = 1..N."""
    noise = simulate_far1(spec, N)
    trend = trend_surface_matrix(surface_id, noise.s_grid, noise.t_grid)
    return noise.with_values(noise.values + trend)
