"""REML selection of the two smoothing parameters from marginal reductions.

Rather than optimizing the full tensor-product criterion, the s-penalty is
tuned on the time-averaged curve and the t-penalty on the series of
curve integrals. Each margin is a univariate penalized-spline problem whose
smoothing parameter is picked by a Gaussian REML criterion.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from ._util import trapezoid_weights
from .splines import BSplineBasis, eval_basis, gram_and_penalty
from .tensor_trend import GridFunctionSeries

__all__ = [
    "MarginalProfile",
    "SmoothingSelection",
    "SmoothingError",
    "s_margin",
    "t_margin",
    "reml_select",
    "penalized_fit",
    "select_lambdas",
    "joint_lambda_scales",
]

# Null-space dimension of the second-derivative penalty (constants, linears).
_PENALTY_NULL_DIM = 2

# Search bracket in log10(lambda) and scan density. The grid scan guards the
# golden-section refinement against multimodal criteria.
_LOG10_BRACKET = (-12.0, 12.0)
_GRID_POINTS = 25
_LOG10_TOL = 1e-3

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class SmoothingError(ValueError):
    """Raised when the REML criterion cannot be evaluated."""


@dataclass(frozen=True)
class MarginalProfile:
    """One marginal reduction of the data: responses on their locations.

    ``which`` is ``"S"`` for the time-averaged curve on the s-grid and
    ``"T"`` for the per-curve integrals on the t-grid.
    """

    responses: np.ndarray
    locations: np.ndarray
    which: str

    def __post_init__(self):
        object.__setattr__(self, "responses", np.asarray(self.responses, dtype=np.float64))
        object.__setattr__(self, "locations", np.asarray(self.locations, dtype=np.float64))
        if self.responses.shape != self.locations.shape:
            raise ValueError("responses and locations must have equal length")
        if np.any(np.diff(self.locations) <= 0):
            raise ValueError("locations must be strictly increasing")
        if self.which not in ("S", "T"):
            raise ValueError(f"margin tag must be 'S' or 'T', got {self.which!r}")


@dataclass(frozen=True)
class SmoothingSelection:
    """Selected smoothing parameter with its criterion value and trace.

    ``trace`` lists every evaluated ``(log10 lambda, criterion)`` pair,
    grid scan first, refinement afterwards.
    """

    lam: float
    reml_value: float
    trace: tuple


def s_margin(data: GridFunctionSeries) -> MarginalProfile:
    """Time-averaged curve ``(1/N) sum_n Y_n`` on the s-grid."""
    return MarginalProfile(data.values.mean(axis=1), data.s_grid, "S")


def t_margin(data: GridFunctionSeries) -> MarginalProfile:
    """Per-curve trapezoidal integrals ``int Y_n(s) ds`` on the t-grid."""
    if data.m < 2:
        raise ValueError("t-margin needs at least two grid points per curve")
    w = trapezoid_weights(data.s_grid)
    return MarginalProfile(w @ data.values, data.t_grid, "T")


class _PenalizedSpline:
    """Stable penalized-spline solver in the penalty eigenbasis.

    Writing S = U diag(e) U', the system (B'B + lam S) theta = B'y is
    solved after rescaling each eigen-direction by 1 / sqrt(1 + lam e_i),
    which keeps the factorized matrix well conditioned for arbitrarily
    large lam (the plain system's conditioning grows with lam and ruins
    the residual of near-interpolating fits).
    """

    def __init__(self, B: np.ndarray, S: np.ndarray):
        self.B = B
        eig, U = linalg.eigh(S)
        eig = np.clip(eig, 0.0, None)
        # rounding leaves the null eigenvalues at ~1e-12 instead of zero;
        # left in, they turn into phantom roughness once scaled by lambda
        eig[eig < 1e-8 * eig.max()] = 0.0
        self.eig = eig
        self.U = U
        self.Bt = B @ U
        self.BtB_t = self.Bt.T @ self.Bt

    def solve(self, y: np.ndarray, lam: float):
        """Returns (theta, residual_ss, roughness = theta' S theta, logdet).

        logdet is log det(B'B + lam S); theta is in the original basis.
        Raises scipy.linalg.LinAlgError if the system is not numerically
        positive definite.
        """
        scale = 1.0 / np.sqrt(1.0 + lam * self.eig)
        system = (scale[:, None] * self.BtB_t * scale[None, :]) + np.diag(
            lam * self.eig * scale**2
        )
        cho = linalg.cho_factor(system, lower=True)
        rhs = scale * (self.Bt.T @ y)
        theta_t = scale * linalg.cho_solve(cho, rhs)
        resid = y - self.Bt @ theta_t
        roughness = float(self.eig @ theta_t**2)
        logdet = 2.0 * float(np.sum(np.log(np.diag(cho[0])))) + float(
            np.sum(np.log1p(lam * self.eig))
        )
        return self.U @ theta_t, float(resid @ resid), roughness, logdet


def penalized_fit(profile: MarginalProfile, basis: BSplineBasis, lam: float) -> np.ndarray:
    """Penalized-spline coefficients for the profile at a given penalty."""
    B = eval_basis(basis, profile.locations)
    S = gram_and_penalty(basis).penalty
    theta, _, _, _ = _PenalizedSpline(B, S).solve(profile.responses, lam)
    return theta


def _reml_criterion_factory(profile: MarginalProfile, basis: BSplineBasis):
    """Closure evaluating the Gaussian REML criterion at log10(lambda).

    V(lam) = (M - d)/2 log r(lam) + 1/2 log det(B'B + lam S)
             - 1/2 log det+(lam S)

    with r(lam) the penalized residual sum of squares at the penalized
    solution, d the penalty null-space dimension and det+ the product of
    the k - d positive eigenvalues. r is mathematically nonnegative but
    cancels to rounding noise when the data are exactly representable with
    zero roughness (for example, exactly linear responses); it is floored
    at a data-scale rounding threshold so such data deterministically
    prefer the maximal penalty instead of tripping the non-finite check.
    """
    y = profile.responses
    B = eval_basis(basis, profile.locations)
    S = gram_and_penalty(basis).penalty
    M = y.size
    k = basis.num_basis
    d = _PENALTY_NULL_DIM
    if M <= d:
        raise ValueError(f"profile length {M} too short for the penalty null space")
    solver = _PenalizedSpline(B, S)
    eig_S = np.sort(solver.eig)
    log_det_plus_S = float(np.sum(np.log(eig_S[d:])))
    r_floor = 1e-24 * max(float(y @ y), 1.0)

    def criterion(log10_lam: float) -> float:
        lam = 10.0 ** log10_lam
        try:
            _, resid_ss, roughness, log_det_C = solver.solve(y, lam)
        except linalg.LinAlgError:
            return np.nan
        r = max(resid_ss + lam * roughness, r_floor)
        log_det_plus = (k - d) * np.log(lam) + log_det_plus_S
        with np.errstate(divide="ignore"):
            return 0.5 * (M - d) * np.log(r) + 0.5 * log_det_C - 0.5 * log_det_plus

    return criterion


def reml_select(profile: MarginalProfile, basis: BSplineBasis) -> SmoothingSelection:
    """Pick the smoothing parameter minimizing the REML criterion.

    A 25-point scan of log10(lambda) over [-12, 12] seeds a golden-section
    search refined to 1e-3 in log10(lambda). Deterministic given inputs.
    """
    criterion = _reml_criterion_factory(profile, basis)
    trace: list = []

    def evaluate(x: float) -> float:
        v = criterion(x)
        if not np.isfinite(v):
            raise SmoothingError(f"REML criterion non-finite at log10(lambda) = {x:.6g}")
        trace.append((x, v))
        return v

    grid = np.linspace(_LOG10_BRACKET[0], _LOG10_BRACKET[1], _GRID_POINTS)
    grid_vals = np.array([evaluate(x) for x in grid])
    i_best = int(np.argmin(grid_vals))
    lo = grid[max(i_best - 1, 0)]
    hi = grid[min(i_best + 1, len(grid) - 1)]

    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d_pt = a + _GOLDEN * (b - a)
    fc, fd = evaluate(c), evaluate(d_pt)
    while (b - a) > _LOG10_TOL:
        if fc <= fd:
            b, d_pt, fd = d_pt, c, fc
            c = b - _GOLDEN * (b - a)
            fc = evaluate(c)
        else:
            a, c, fc = c, d_pt, fd
            d_pt = a + _GOLDEN * (b - a)
            fd = evaluate(d_pt)

    xs, vs = zip(*trace)
    best = int(np.argmin(vs))
    return SmoothingSelection(lam=10.0 ** xs[best], reml_value=vs[best], trace=tuple(trace))


def select_lambdas(
    data: GridFunctionSeries,
    basis_s: BSplineBasis,
    basis_t: BSplineBasis,
    *,
    scale_s: float = 1.0,
    scale_t: float = 1.0,
) -> tuple:
    """REML-selected ``(lambda_s, lambda_t)`` from the two data margins.

    The marginal selections are used directly in the tensor-product fit;
    ``scale_s`` and ``scale_t`` are optional multipliers for callers that
    want to rescale the transfer (both default to 1). Rescaled values are
    capped at the top of the search bracket, beyond which the joint solve
    cannot distinguish penalty from data in double precision anyway.
    """
    cap = 10.0 ** _LOG10_BRACKET[1]
    sel_s = reml_select(s_margin(data), basis_s)
    sel_t = reml_select(t_margin(data), basis_t)
    return min(sel_s.lam * scale_s, cap), min(sel_t.lam * scale_t, cap)


# Serial-correlation allowance in the t-margin transfer: the marginal REML
# assumes independent residuals, while the integrated series inherits the
# FAR dependence; calibrated on the simulation study (flat optimum between
# roughly 20 and 100).
_T_MARGIN_CORRELATION_FACTOR = 40.0


def joint_lambda_scales(data: GridFunctionSeries) -> tuple:
    """Transfer factors from the marginal REML fits to the joint fit.

    Each s-margin point aggregates N joint observations and each t-margin
    point aggregates m, so the joint penalties must grow by those shares
    to preserve the penalty-to-data balance the margins selected. The
    t-factor carries an extra allowance for the serial correlation of the
    integrated series.
    """
    return float(data.N), _T_MARGIN_CORRELATION_FACTOR * float(data.m)
