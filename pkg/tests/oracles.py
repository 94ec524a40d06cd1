"""Independent reference implementations used only by the test suite."""
import itertools

import numpy as np
from scipy.optimize import linprog


def _tube_lp(x, m):
    """Smallest half-width t of the ECDF tube admitting a unimodal CDF with mode at x[m].

    The unimodal CDF is represented by its values g_i at the sorted samples;
    convexity holds up to index m and concavity from m on.
    """
    n = len(x)
    nv = n + 1  # g_0..g_{n-1}, t
    a_ub, b_ub = [], []

    def row():
        return np.zeros(nv)

    for i in range(n):
        # g_i >= (i+1)/n - t
        r = row(); r[i] = -1.0; r[n] = -1.0
        a_ub.append(r); b_ub.append(-(i + 1) / n)
        # g_i <= i/n + t
        r = row(); r[i] = 1.0; r[n] = -1.0
        a_ub.append(r); b_ub.append(i / n)
    for i in range(n - 1):
        r = row(); r[i] = 1.0; r[i + 1] = -1.0
        a_ub.append(r); b_ub.append(0.0)
    for i in range(1, n - 1):
        h0 = x[i] - x[i - 1]
        h1 = x[i + 1] - x[i]
        # slope (g_i - g_{i-1})/h0 vs (g_{i+1} - g_i)/h1, cross-multiplied
        r = row()
        r[i - 1] = h1
        r[i] = -(h0 + h1)
        r[i + 1] = h0
        if i < m:
            # convex: right slope >= left slope
            a_ub.append(-r); b_ub.append(0.0)
        elif i > m:
            a_ub.append(r); b_ub.append(0.0)
    c = row(); c[n] = 1.0
    bounds = [(0.0, 1.0)] * n + [(0.0, 1.0)]
    res = linprog(c, A_ub=np.array(a_ub), b_ub=np.array(b_ub), bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(res.message)
    return res.fun


def _candidates(x):
    """Every value the Dip of a sample with distinct entries can take."""
    n = len(x)
    out = [1.0 / (2 * n)]
    for i, j, k in itertools.combinations(range(n), 3):
        lam = (x[j] - x[i]) / (x[k] - x[i])
        out.append((j - i + 1 - (k - i) * lam) / (2 * n))
        out.append((i - j + 1 + (k - i) * lam) / (2 * n))
    return np.array(out)


def lp_dip(x, snap_tol=1e-7):
    """Dip via exhaustive linear programming over the mode location.

    The LP optimum is snapped onto the finite candidate set to remove solver
    round-off; the snap fails loudly if no candidate is close.
    """
    x = np.sort(np.asarray(x, dtype=float))
    n = len(x)
    if n < 2 or x[-1] == x[0]:
        return 1.0 / (2 * max(n, 1)) if n >= 2 else 0.0
    raw = min(_tube_lp(x, m) for m in range(n))
    cand = _candidates(x)
    cand = cand[cand >= 1.0 / (2 * n) - 1e-15]
    k = np.argmin(np.abs(cand - raw))
    if abs(cand[k] - raw) > snap_tol:
        raise AssertionError(f"LP optimum {raw} is not a candidate value")
    return float(cand[k])


def ecdf_chord_boundary(x, a_end, b_start, grid=200_001):
    """Chord/ECDF crossing closest to the midpoint, by grid scan and bisection.

    ``x`` is sorted; the chord joins ``(x[a_end], F(x[a_end]))`` and
    ``(x[b_start], F(x[b_start]))`` where ``F`` is the right-continuous ECDF.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    xa, xb = x[a_end], x[b_start]
    mid = 0.5 * (xa + xb)

    def f(t):
        ecdf = np.searchsorted(x, t, side="right") / n
        chord = (a_end + 1) / n + ((b_start - a_end) / n) * (t - xa) / (xb - xa)
        return ecdf - chord

    t = np.linspace(xa, xb, grid)[1:-1]
    v = f(t)
    roots = []
    for i in np.flatnonzero(np.sign(v[:-1]) != np.sign(v[1:])):
        lo, hi = t[i], t[i + 1]
        for _ in range(200):
            m = 0.5 * (lo + hi)
            if np.sign(f(m)) == np.sign(f(lo)):
                lo = m
            else:
                hi = m
        roots.append(0.5 * (lo + hi))
    roots += [float(r) for r in t[v == 0]]
    if not roots:
        return mid
    roots = np.array(roots)
    return float(roots[np.argmin(np.abs(roots - mid))])
