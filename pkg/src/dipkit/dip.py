"""Hartigan's Dip statistic with modal interval and modal triangle."""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from ._dip_kernel import dip_sorted
from ._validation import InvalidInputError, as_axis, as_matrix, as_sample


@dataclass(frozen=True)
class DipResult:
    """Dip of a sorted sample together with the indices that realize it.

    Attributes
    ----------
    dip : float
        Dip statistic, ``1/(2n) <= dip <= 0.25`` (``0`` for a single point).
    n : int
        Sample size.
    modal_interval : tuple of int
        Sorted-index pair ``(lo, hi)`` of the modal interval.
    modal_triangle : tuple of int or None
        Sorted-index triple ``(i1, i2, i3)`` whose ECDF gap equals the dip,
        or None if the dip is the ``1/(2n)`` floor or ``n <= 3``.
    side : {"gcm", "lcm"} or None
        Hull on which the triangle lies: the convex minorant left of the
        modal interval or the concave majorant right of it.
    degenerate : bool
        True for ``n == 1``.
    """

    dip: float
    n: int
    modal_interval: Tuple[int, int]
    modal_triangle: Optional[Tuple[int, int, int]] = None
    side: Optional[str] = None
    degenerate: bool = False


def _is_sorted(x):
    return bool(np.all(x[1:] >= x[:-1]))


def compute_dip(sample, sort=False) -> DipResult:
    """Compute the Dip statistic of a one-dimensional sample.

    Parameters
    ----------
    sample : array-like of shape (n,)
        Finite values in non-decreasing order.
    sort : bool, default=False
        Sort ``sample`` first instead of rejecting unsorted input. The
        returned indices then refer to the sorted order.

    Returns
    -------
    DipResult
    """
    x = as_sample(sample)
    if sort:
        x = np.sort(x, kind="stable")
    elif not _is_sorted(x):
        raise InvalidInputError("sample must be sorted in non-decreasing order")
    n = x.shape[0]
    if n == 1:
        return DipResult(0.0, 1, (0, 0), None, None, True)
    d, lo, hi, i1, i2, i3, side = dip_sorted(np.ascontiguousarray(x))
    dip = d / (2.0 * n)
    if n <= 3 or i2 < 0:
        triangle, side_name = None, None
        if n <= 3:
            lo, hi = 0, n - 1
    else:
        triangle = (int(i1), int(i2), int(i3))
        side_name = "lcm" if side > 0 else "gcm"
    return DipResult(float(dip), n, (int(lo), int(hi)), triangle, side_name, False)


def project_and_sort(data, axis):
    """Project the rows of ``data`` onto ``axis`` and sort the result.

    Parameters
    ----------
    data : array-like of shape (n, d)
    axis : array-like of shape (d,)
        Nonzero projection direction. It is not normalized.

    Returns
    -------
    values : ndarray of shape (n,)
        Sorted projections.
    order : ndarray of shape (n,)
        Row index of ``data`` for each sorted position (stable for ties).
    """
    X = as_matrix(data)
    a = as_axis(axis, X.shape[1])
    proj = X @ a
    order = np.argsort(proj, kind="stable")
    return proj[order], order
