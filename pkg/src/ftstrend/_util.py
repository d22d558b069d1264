"""Small shared numerical helpers."""

from __future__ import annotations

import numpy as np


def trapezoid_weights(x: np.ndarray) -> np.ndarray:
    """Quadrature weights of the trapezoidal rule on the grid `x`.

    ``w @ f(x)`` equals the composite trapezoid approximation of
    ``int f`` over ``[x[0], x[-1]]``. Requires at least two grid points.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("trapezoid weights need a 1-d grid with >= 2 points")
    w = np.zeros_like(x)
    dx = np.diff(x)
    w[:-1] += 0.5 * dx
    w[1:] += 0.5 * dx
    return w
