"""Gradients of the Dip and of its sigmoid p-value with respect to a projection axis."""
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._validation import DegenerateProjectionError, NoGradientError, as_axis, as_matrix
from .dip import DipResult, compute_dip
from .pvalue import DEFAULT_COEFFS, DEFAULT_SHAPE, BCoefficients, SigmoidShape, b_of_n, sigmoid_dpdd, sigmoid_pvalue


@dataclass(frozen=True)
class GradientResult:
    """Dip and p-value of a projection together with their axis gradients."""

    dip: float
    dip_gradient: np.ndarray
    pvalue: Optional[float] = None
    pvalue_gradient: Optional[np.ndarray] = None


def triangle_dip(y, result: DipResult):
    """Dip recomputed from the modal triangle of ``result`` on sorted values ``y``.

    On the minorant side the triangle joins the lower ECDF corners at ``i1``
    and ``i3`` and is measured against the upper corner at ``i2``; on the
    majorant side the roles are swapped.
    """
    if result.modal_triangle is None:
        raise NoGradientError("result has no modal triangle")
    n = result.n
    i1, i2, i3 = result.modal_triangle
    lam = (y[i2] - y[i1]) / (y[i3] - y[i1])
    if result.side == "gcm":
        return ((i2 + 1) - i1 - (i3 - i1) * lam) / (2.0 * n)
    return ((i3 - i1) * lam - (i2 - i1 - 1)) / (2.0 * n)


def _triangle_gradient(X, y, order, result: DipResult):
    if result.modal_triangle is None:
        raise NoGradientError("no modal triangle: the Dip sits at its 1/(2n) floor or n <= 3")
    i1, i2, i3 = result.modal_triangle
    y1, y2, y3 = y[i1], y[i2], y[i3]
    span = y3 - y1
    if span == 0.0:
        raise DegenerateProjectionError("projected values coincide across the modal triangle")
    x1, x2, x3 = X[order[i1]], X[order[i2]], X[order[i3]]
    grad_lam = ((x2 - x1) * span - (y2 - y1) * (x3 - x1)) / span**2
    sign = -1.0 if result.side == "gcm" else 1.0
    return sign * (i3 - i1) / (2.0 * result.n) * grad_lam


def dip_gradient(data, axis) -> GradientResult:
    """Gradient of the Dip of ``data @ axis`` with respect to ``axis``.

    Parameters
    ----------
    data : array-like of shape (n, d)
    axis : array-like of shape (d,)

    Returns
    -------
    GradientResult
        ``pvalue`` fields are left empty.

    Raises
    ------
    NoGradientError
        If the Dip has no modal triangle.
    DegenerateProjectionError
        If the triangle's end points project onto the same value.
    """
    X = as_matrix(data)
    a = as_axis(axis, X.shape[1])
    proj = X @ a
    order = np.argsort(proj, kind="stable")
    y = proj[order]
    res = compute_dip(y)
    return GradientResult(res.dip, _triangle_gradient(X, y, order, res))


def pvalue_gradient(
    data, axis, shape: SigmoidShape = DEFAULT_SHAPE, coeffs: BCoefficients = DEFAULT_COEFFS
) -> GradientResult:
    """Gradient of the sigmoid Dip p-value of ``data @ axis`` with respect to ``axis``.

    The p-value gradient is the Dip gradient scaled by ``dp/dDip``, which is
    never positive.

    Returns
    -------
    GradientResult
    """
    X = as_matrix(data)
    g = dip_gradient(X, axis)
    b = b_of_n(X.shape[0], coeffs)
    p = sigmoid_pvalue(g.dip, b, shape)
    return GradientResult(g.dip, g.dip_gradient, p, sigmoid_dpdd(g.dip, b, shape) * g.dip_gradient)
