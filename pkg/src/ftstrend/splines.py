"""Univariate B-spline bases on equidistant knots.

Provides clamped (endpoint-replicated) bases with evaluation of values and
derivatives via the Cox-de Boor recurrence, plus exact Gram and
second-derivative penalty matrices computed by piecewise Gauss-Legendre
quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BSplineBasis",
    "BasisMatrices",
    "make_basis",
    "eval_basis",
    "gram_and_penalty",
]


@dataclass(frozen=True)
class BSplineBasis:
    """Clamped B-spline basis with equidistant interior knots.

    Attributes
    ----------
    domain_lo, domain_hi : float
        Endpoints of the coordinate interval.
    num_basis : int
        Number of basis functions k (k >= order).
    order : int
        Spline order (polynomial degree + 1); 4 gives cubics.
    knots : np.ndarray
        Nondecreasing knot vector of length ``num_basis + order``; the
        endpoints are replicated ``order`` times and the interior knots
        are equidistant.
    """

    domain_lo: float
    domain_hi: float
    num_basis: int
    order: int
    knots: np.ndarray

    @property
    def degree(self) -> int:
        return self.order - 1

    def same_config(self, other: "BSplineBasis") -> bool:
        """True if the two bases span the identical function space."""
        return (
            self.num_basis == other.num_basis
            and self.order == other.order
            and self.domain_lo == other.domain_lo
            and self.domain_hi == other.domain_hi
        )


@dataclass(frozen=True)
class BasisMatrices:
    """Gram matrix and second-derivative penalty matrix of one basis.

    ``gram[i, j] = int b_i(x) b_j(x) dx`` and
    ``penalty[i, j] = int b_i''(x) b_j''(x) dx`` over the basis domain.
    """

    gram: np.ndarray
    penalty: np.ndarray


def make_basis(domain_lo: float, domain_hi: float, num_basis: int, order: int = 4) -> BSplineBasis:
    """Build a clamped B-spline basis with equidistant interior knots.

    Parameters
    ----------
    domain_lo, domain_hi : float
        Interval endpoints, ``domain_lo < domain_hi``.
    num_basis : int
        Number of basis functions; must be at least ``order``.
    order : int
        Spline order (degree + 1), at least 2. Default 4 (cubic).
    """
    if order < 2:
        raise ValueError(f"spline order must be >= 2, got {order}")
    if num_basis < order:
        raise ValueError(f"num_basis ({num_basis}) must be >= order ({order})")
    if not (np.isfinite(domain_lo) and np.isfinite(domain_hi)) or domain_lo >= domain_hi:
        raise ValueError(f"degenerate domain [{domain_lo}, {domain_hi}]")

    n_interior = num_basis - order
    interior = np.linspace(domain_lo, domain_hi, n_interior + 2)[1:-1]
    knots = np.concatenate(
        [np.full(order, float(domain_lo)), interior, np.full(order, float(domain_hi))]
    )
    knots.setflags(write=False)
    return BSplineBasis(float(domain_lo), float(domain_hi), num_basis, order, knots)


def _all_splines(knots: np.ndarray, degree: int, x: np.ndarray) -> np.ndarray:
    """All degree-`degree` B-splines on `knots` at points `x`.

    Cox-de Boor recurrence, vectorized over points. Returns an array of
    shape ``(len(x), len(knots) - degree - 1)``. Points equal to the last
    knot are assigned to the final nonempty span (left-continuity).
    """
    n_knots = len(knots)
    B = ((x[:, None] >= knots[None, :-1]) & (x[:, None] < knots[None, 1:])).astype(np.float64)
    at_end = x == knots[-1]
    if np.any(at_end):
        last_span = int(np.searchsorted(knots, knots[-1], side="left")) - 1
        B[at_end, :] = 0.0
        B[at_end, last_span] = 1.0
    for d in range(1, degree + 1):
        cols = n_knots - d - 1
        denom_l = knots[d : d + cols] - knots[:cols]
        denom_r = knots[d + 1 : d + 1 + cols] - knots[1 : 1 + cols]
        scale_l = np.where(denom_l > 0, 1.0 / np.where(denom_l > 0, denom_l, 1.0), 0.0)
        scale_r = np.where(denom_r > 0, 1.0 / np.where(denom_r > 0, denom_r, 1.0), 0.0)
        left = (x[:, None] - knots[None, :cols]) * scale_l[None, :] * B[:, :cols]
        right = (knots[None, d + 1 : d + 1 + cols] - x[:, None]) * scale_r[None, :] * B[:, 1 : 1 + cols]
        B = left + right
    return B


def _all_spline_derivs(knots: np.ndarray, degree: int, x: np.ndarray, deriv: int) -> np.ndarray:
    """`deriv`-th derivative of every degree-`degree` B-spline at `x`."""
    if deriv == 0:
        return _all_splines(knots, degree, x)
    lower = _all_spline_derivs(knots, degree - 1, x, deriv - 1)
    cols = len(knots) - degree - 1
    denom_l = knots[degree : degree + cols] - knots[:cols]
    denom_r = knots[degree + 1 : degree + 1 + cols] - knots[1 : 1 + cols]
    scale_l = np.where(denom_l > 0, degree / np.where(denom_l > 0, denom_l, 1.0), 0.0)
    scale_r = np.where(denom_r > 0, degree / np.where(denom_r > 0, denom_r, 1.0), 0.0)
    return lower[:, :cols] * scale_l[None, :] - lower[:, 1 : 1 + cols] * scale_r[None, :]


# Overshoot beyond this fraction of the domain length is rejected; smaller
# rounding slack is clamped to the endpoint instead of extrapolated.
_DOMAIN_SLACK = 1e-12


def eval_basis(basis: BSplineBasis, points, deriv: int = 0) -> np.ndarray:
    """Evaluate all basis functions (or a derivative) at the given points.

    Parameters
    ----------
    basis : BSplineBasis
    points : array_like
        Points inside ``[domain_lo, domain_hi]``. Out-of-domain points
        raise; there is no extrapolation.
    deriv : int
        Derivative order, ``0 <= deriv < order``.

    Returns
    -------
    np.ndarray
        Matrix of shape ``(len(points), num_basis)`` whose entry (p, j)
        is the ``deriv``-th derivative of basis function j at point p.
    """
    x = np.atleast_1d(np.asarray(points, dtype=np.float64)).copy()
    if x.ndim != 1:
        raise ValueError("points must be one-dimensional")
    if deriv < 0 or deriv >= basis.order:
        raise ValueError(f"deriv must be in [0, {basis.order - 1}], got {deriv}")
    slack = _DOMAIN_SLACK * (basis.domain_hi - basis.domain_lo)
    if np.any(x < basis.domain_lo - slack) or np.any(x > basis.domain_hi + slack):
        bad = x[(x < basis.domain_lo - slack) | (x > basis.domain_hi + slack)][0]
        raise ValueError(
            f"point {bad!r} outside basis domain [{basis.domain_lo}, {basis.domain_hi}]"
        )
    np.clip(x, basis.domain_lo, basis.domain_hi, out=x)
    return _all_spline_derivs(basis.knots, basis.degree, x, deriv)


def _gauss_legendre_on_spans(basis: BSplineBasis, nodes_per_span: int):
    """Gauss-Legendre nodes and weights tiled over each nonempty knot span."""
    breakpoints = np.unique(basis.knots)
    ref_nodes, ref_weights = np.polynomial.legendre.leggauss(nodes_per_span)
    lo = breakpoints[:-1]
    hi = breakpoints[1:]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    nodes = (mid[:, None] + half[:, None] * ref_nodes[None, :]).ravel()
    weights = (half[:, None] * ref_weights[None, :]).ravel()
    return nodes, weights


def _quadrature_matrix(basis: BSplineBasis, deriv: int, nodes_per_span: int) -> np.ndarray:
    """Matrix of pairwise integrals of the deriv-th basis derivatives."""
    nodes, weights = _gauss_legendre_on_spans(basis, nodes_per_span)
    B = eval_basis(basis, nodes, deriv)
    M = B.T @ (weights[:, None] * B)
    return 0.5 * (M + M.T)


def gram_and_penalty(basis: BSplineBasis) -> BasisMatrices:
    """Gram and second-derivative penalty matrices of the basis.

    Each entry is computed by Gauss-Legendre quadrature per knot span with
    enough nodes to integrate the piecewise-polynomial integrand exactly:
    degree ``2 (order - 1)`` for the Gram matrix and ``2 (order - 3)`` for
    the penalty. Requires ``order >= 3`` so second derivatives exist.
    """
    if basis.order < 3:
        raise ValueError("second-derivative penalty requires order >= 3")
    n_gram = max(2, math.ceil((2 * (basis.order - 1) + 1) / 2))
    n_pen = max(2, math.ceil((2 * (basis.order - 3) + 1) / 2))
    gram = _quadrature_matrix(basis, 0, n_gram)
    penalty = _quadrature_matrix(basis, 2, n_pen)
    return BasisMatrices(gram=gram, penalty=penalty)
