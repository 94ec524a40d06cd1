"""Compiled inner loops for the Dip statistic.

The traversal follows Hartigan & Hartigan's AS 217 algorithm as revised by
M. Maechler (R package ``diptest``), with indices shifted to start at 0.
"""
import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def dip_sorted(x):
    """Dip of a sorted sample in units of ``1 / (2n)``.

    Returns ``(d, low, high, i1, i2, i3, side)`` where ``d / (2n)`` is the Dip,
    ``(low, high)`` is the modal interval and ``(i1, i2, i3)`` the modal
    triangle (``i2 == -1`` when no triangle was found). ``side`` is ``-1`` if
    the triangle lies on the convex minorant and ``+1`` for the concave
    majorant.
    """
    n = x.shape[0]
    low = 0
    high = n - 1
    dip = 1.0
    t1 = -1
    t2 = -1
    t3 = -1
    side = 0
    if n < 2 or x[n - 1] == x[0]:
        return dip, low, high, t1, t2, t3, side

    mn = np.empty(n, dtype=np.int64)
    mn[0] = 0
    for j in range(1, n):
        mn[j] = j - 1
        while True:
            mnj = mn[j]
            mnmnj = mn[mnj]
            if mnj == 0 or (x[j] - x[mnj]) * (mnj - mnmnj) < (x[mnj] - x[mnmnj]) * (j - mnj):
                break
            mn[j] = mnmnj

    mj = np.empty(n, dtype=np.int64)
    mj[n - 1] = n - 1
    for k in range(n - 2, -1, -1):
        mj[k] = k + 1
        while True:
            mjk = mj[k]
            mjmjk = mj[mjk]
            if mjk == n - 1 or (x[k] - x[mjk]) * (mjk - mjmjk) < (x[mjk] - x[mjmjk]) * (k - mjk):
                break
            mj[k] = mjmjk

    gcm = np.empty(n + 1, dtype=np.int64)
    lcm = np.empty(n + 1, dtype=np.int64)
    while True:
        gcm[0] = high
        i = 0
        while gcm[i] > low:
            gcm[i + 1] = mn[gcm[i]]
            i += 1
        ig = i
        l_gcm = i
        ix = ig - 1

        lcm[0] = low
        i = 0
        while lcm[i] < high:
            lcm[i + 1] = mj[lcm[i]]
            i += 1
        ih = i
        l_lcm = i
        iv = 1

        d = 0.0
        if l_gcm != 1 or l_lcm != 1:
            while True:
                gcmix = gcm[ix]
                lcmiv = lcm[iv]
                if gcmix > lcmiv:
                    gcmil = gcm[ix + 1]
                    dx = (lcmiv - gcmil + 1) - (x[lcmiv] - x[gcmil]) * (gcmix - gcmil) / (x[gcmix] - x[gcmil])
                    iv += 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv - 1
                else:
                    lcmivl = lcm[iv - 1]
                    dx = (x[gcmix] - x[lcmivl]) * (lcmiv - lcmivl) / (x[lcmiv] - x[lcmivl]) - (gcmix - lcmivl - 1)
                    ix -= 1
                    if dx >= d:
                        d = dx
                        ig = ix + 1
                        ih = iv
                if ix < 0:
                    ix = 0
                if iv > l_lcm:
                    iv = l_lcm
                if gcm[ix] == lcm[iv]:
                    break
        else:
            d = 1.0

        if d < dip:
            break

        # dip contributions of the convex minorant left of the modal interval
        dip_l = 0.0
        j_l = -1
        gb = -1
        ge = -1
        for j in range(ig, l_gcm):
            max_t = 1.0
            j_ = -1
            jb = gcm[j + 1]
            je = gcm[j]
            if je - jb > 1 and x[je] != x[jb]:
                c = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    t = (jj - jb + 1) - (x[jj] - x[jb]) * c
                    if max_t < t:
                        max_t = t
                        j_ = jj
            if dip_l < max_t:
                dip_l = max_t
                j_l = j_
                gb = jb
                ge = je

        # and of the concave majorant right of it
        dip_u = 0.0
        j_u = -1
        lb = -1
        le = -1
        for j in range(ih, l_lcm):
            max_t = 1.0
            j_ = -1
            jb = lcm[j]
            je = lcm[j + 1]
            if je - jb > 1 and x[je] != x[jb]:
                c = (je - jb) / (x[je] - x[jb])
                for jj in range(jb, je + 1):
                    t = (x[jj] - x[jb]) * c - (jj - jb - 1)
                    if max_t < t:
                        max_t = t
                        j_ = jj
            if dip_u < max_t:
                dip_u = max_t
                j_u = j_
                lb = jb
                le = je

        if dip_u > dip_l:
            dip_new = dip_u
        else:
            dip_new = dip_l
        if dip < dip_new:
            dip = dip_new
            if dip_u > dip_l:
                t1, t2, t3, side = lb, j_u, le, 1
            else:
                t1, t2, t3, side = gb, j_l, ge, -1

        if low == gcm[ig] and high == lcm[ih]:
            break
        low = gcm[ig]
        high = lcm[ih]

    return dip, low, high, t1, t2, t3, side


@njit(cache=True, nogil=True)
def dip_value_sorted(x):
    n = x.shape[0]
    if n < 2:
        return 0.0
    return dip_sorted(x)[0] / (2.0 * n)


@njit(cache=True, nogil=True)
def uniform_null_dips(draws):
    """Dip of every row of ``draws`` (rows are sorted in place)."""
    reps = draws.shape[0]
    out = np.empty(reps)
    for r in range(reps):
        row = draws[r]
        row.sort()
        out[r] = dip_value_sorted(row)
    return out
