"""Regeneration of the bootstrapped Dip table and refitting of the sigmoid."""
import json
import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Dict

import numpy as np
from scipy.optimize import least_squares

from ._validation import FitError, InvalidInputError, check_positive_int
from .pvalue import (
    DEFAULT_SHAPE,
    BCoefficients,
    LookupTable,
    SigmoidShape,
    _atomic_write_text,
    b_of_n,
    pvalue_table,
    sigmoid_pvalue,
    simulate_null_dips,
)

logger = logging.getLogger(__name__)

DEFAULT_REPETITIONS = 2000


def quantile_levels(count=307, tail=1e-4, tail_points=None):
    """Quantile levels dense in both tails.

    ``tail_points`` geometrically spaced levels in ``[tail, 0.01)`` and their
    mirror images near 1 surround a uniform grid on ``[0.01, 0.99]``. By
    default 40 of 307 levels lie in each tail, scaled for other counts.

    Returns
    -------
    ndarray
        Strictly increasing levels in (0, 1).
    """
    count = check_positive_int(count, "count")
    if tail_points is None:
        tail_points = min(round(40 * count / 307), (count - 2) // 2)
    middle = count - 2 * tail_points
    if tail_points < 0 or middle < 2:
        raise InvalidInputError("count too small for the requested tail points")
    low = np.geomspace(tail, 0.01, tail_points, endpoint=False)
    mid = np.linspace(0.01, 0.99, middle)
    high = 1.0 - low[::-1]
    return np.concatenate([low, mid, high])


def default_table_sizes(count=63, lo=4, hi=150_000):
    """Roughly geometric, strictly increasing integer sample sizes."""
    sizes = np.unique(np.round(np.geomspace(lo, hi, count)).astype(np.int64))
    while sizes.size < count:
        # rounding collapses neighbours at the small end; fill with the next free integers
        extra = np.setdiff1d(np.arange(lo, lo + 2 * count), sizes)[: count - sizes.size]
        sizes = np.unique(np.concatenate([sizes, extra]))
    return sizes


def row_from_dips(dips, levels):
    """(dip, p) pairs of one table row from simulated null dips.

    The dip is the empirical quantile at each level and ``p = 1 - level``.
    Equal quantiles keep the largest p so that dips are strictly increasing.
    """
    q = np.quantile(np.asarray(dips), levels)
    p = 1.0 - np.asarray(levels)
    keep = np.concatenate([[True], np.diff(q) > 0])
    return q[keep], p[keep]


def bootstrap_table(sizes, levels=None, repetitions=DEFAULT_REPETITIONS, rng_seed=0, n_jobs=1, progress=False):
    """Bootstrap a Dip look-up table under the uniform null.

    Parameters
    ----------
    sizes : sequence of int
        Strictly increasing sample sizes.
    levels : array-like, optional
        Quantile levels; defaults to :func:`quantile_levels`.
    repetitions : int
        Uniform samples drawn per size.
    rng_seed : int
        Each size uses its own stream derived from ``(rng_seed, n)``.

    Returns
    -------
    LookupTable
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    if sizes.ndim != 1 or sizes.size == 0 or np.any(np.diff(sizes) <= 0) or sizes[0] < 1:
        raise InvalidInputError("sizes must be positive, unique and ascending")
    repetitions = check_positive_int(repetitions, "repetitions")
    levels = quantile_levels() if levels is None else np.asarray(levels, dtype=np.float64)
    if np.any(np.diff(levels) <= 0) or levels[0] <= 0 or levels[-1] >= 1:
        raise InvalidInputError("levels must be strictly increasing inside (0, 1)")
    dips, ps = [], []
    for n in sizes:
        t0 = time.perf_counter()
        null = simulate_null_dips(int(n), repetitions, (int(rng_seed), int(n)), n_jobs=n_jobs)
        d, p = row_from_dips(null, levels)
        dips.append(d)
        ps.append(p)
        if progress:
            logger.info("n=%d done in %.1fs", n, time.perf_counter() - t0)
    meta = {
        "repetitions": repetitions,
        "seed": int(rng_seed),
        "levels": [float(v) for v in levels],
    }
    return LookupTable(sizes, dips, ps, meta)


THETA_NAMES = ("w", "h", "k", "q", "r", "s", "u")


def sigmoid7(dip, theta):
    """Two-term sigmoid with separate slopes ``q`` and ``r`` for each term.

    Parameters
    ----------
    dip : array-like
    theta : sequence of 7 floats
        ``(w, h, k, q, r, s, u)``.

    Returns
    -------
    ndarray
    """
    w, h, k, q, r, s, u = theta
    dip = np.asarray(dip, dtype=np.float64)
    e_s = np.exp(-q * dip + s)
    e_u = np.exp(-r * dip + u)
    bm1 = w * np.expm1(np.log1p(h * e_s) / h) + (1.0 - w) * np.expm1(np.log1p(k * e_u) / k)
    return np.clip(bm1 / (1.0 + bm1), 0.0, 1.0)


def _theta_starts(n, restarts, rng):
    b = float(b_of_n(n)) if n is not None else 100.0
    base = np.array([DEFAULT_SHAPE.w, DEFAULT_SHAPE.h, DEFAULT_SHAPE.k, b, b, DEFAULT_SHAPE.s, DEFAULT_SHAPE.u])
    starts = [base]
    for _ in range(max(0, restarts - 1)):
        jitter = np.exp(rng.normal(0.0, 0.3, 7))
        x = base * jitter
        x[0] = min(max(x[0], 0.05), 0.95)
        starts.append(x)
    return starts


def fit_theta_per_n(dips, ps, n=None, restarts=8, rng_seed=0):
    """Fit all seven sigmoid parameters to one table row.

    Parameters
    ----------
    dips, ps : array-like
        The row's (dip, p) pairs.
    n : int, optional
        Sample size of the row; only used to seed the starting slopes.
    restarts : int, default=8
        Starting points; the first is the default shape.
    rng_seed : int, default=0
        Seed of the jittered starts.

    Returns
    -------
    ndarray of shape (7,)
        Best-MSE ``(w, h, k, q, r, s, u)``.

    Raises
    ------
    FitError
        If the row is too short, carries no sigmoid structure or no start
        converges.
    """
    dips = np.asarray(dips, dtype=np.float64)
    ps = np.asarray(ps, dtype=np.float64)
    if dips.shape != ps.shape or dips.ndim != 1:
        raise InvalidInputError("dips and ps must be 1-D of equal length")
    if dips.size < 7:
        raise FitError(f"row has {dips.size} pairs, at least 7 needed")
    if np.ptp(ps) < 1e-3:
        raise FitError("row p-values are constant; no sigmoid structure to fit")
    rng = np.random.default_rng(rng_seed)
    lower = [0.0, 1e-6, 1e-6, 1e-6, 1e-6, -np.inf, -np.inf]
    upper = [1.0, np.inf, np.inf, np.inf, np.inf, np.inf, np.inf]
    best, best_mse, messages = None, np.inf, []
    for x0 in _theta_starts(n, check_positive_int(restarts, "restarts"), rng):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                res = least_squares(
                    lambda t: sigmoid7(dips, t) - ps, x0, bounds=(lower, upper), x_scale="jac", max_nfev=4000
                )
        except (ValueError, FloatingPointError) as exc:
            messages.append(str(exc))
            continue
        mse = float(np.mean(res.fun**2))
        messages.append(res.message)
        if np.isfinite(mse) and res.status > 0 and mse < best_mse:
            best, best_mse = res.x, mse
    if best is None:
        raise FitError("no restart converged: " + "; ".join(messages))
    return best


def freeze_shape(theta_per_n) -> SigmoidShape:
    """Across-N mean of ``w, h, k, s, u``.

    Parameters
    ----------
    theta_per_n : mapping n -> 7-vector, or array of shape (rows, 7)

    Returns
    -------
    SigmoidShape
    """
    thetas = np.asarray(list(theta_per_n.values()) if isinstance(theta_per_n, dict) else theta_per_n, dtype=float)
    if thetas.ndim != 2 or thetas.shape[1] != 7 or thetas.shape[0] < 2:
        raise InvalidInputError("need at least two fitted 7-parameter rows")
    m = thetas.mean(axis=0)
    return SigmoidShape(w=m[0], h=m[1], k=m[2], s=m[5], u=m[6])


def _cells(table: LookupTable):
    n = np.concatenate([np.full(len(d), s, dtype=np.float64) for s, d in zip(table.sizes, table.dips)])
    return n, np.concatenate(table.dips), np.concatenate(table.ps)


def table_mse(table: LookupTable, coeffs: BCoefficients, shape: SigmoidShape = DEFAULT_SHAPE):
    """Mean squared error of the sigmoid over all table cells."""
    n, d, p = _cells(table)
    b = coeffs.b1 * np.sqrt(n) + coeffs.b2
    return float(np.mean((sigmoid_pvalue(d, b, shape) - p) ** 2))


def fit_b(table: LookupTable, shape: SigmoidShape = DEFAULT_SHAPE, starts=((17.0, 12.0), (10.0, 0.0), (30.0, 40.0))):
    """Fit ``b(N) = b1 * sqrt(N) + b2`` to every cell of ``table``.

    Parameters
    ----------
    table : LookupTable
    shape : SigmoidShape
        Frozen shape parameters.
    starts : sequence of (b1, b2)
        Starting points of the least-squares runs.

    Returns
    -------
    BCoefficients

    Raises
    ------
    FitError
        If no start converges to a positive ``b1``.
    """
    n, d, p = _cells(table)
    if n.size == 0:
        raise InvalidInputError("table is empty")
    root = np.sqrt(n)

    def resid(c):
        return sigmoid_pvalue(d, c[0] * root + c[1], shape) - p

    best, best_cost = None, np.inf
    for x0 in starts:
        with np.errstate(over="ignore", invalid="ignore"):
            res = least_squares(resid, np.asarray(x0, float), method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if res.status > 0 and np.isfinite(res.cost) and res.x[0] > 0 and res.cost < best_cost:
            best, best_cost = res.x, res.cost
    if best is None:
        raise FitError("fit of (b1, b2) did not converge from any start")
    return BCoefficients(b1=float(best[0]), b2=float(best[1]))


def holdout_table(table: LookupTable, repetitions=DEFAULT_REPETITIONS, rng_seed=1, levels=None, n_jobs=1):
    """Fresh bootstrap rows at the integer midpoints between adjacent table sizes."""
    sizes = np.asarray(table.sizes)
    if sizes.size < 2:
        raise InvalidInputError("table needs at least two sizes")
    mids = np.unique((sizes[:-1] + sizes[1:]) // 2)
    mids = mids[~np.isin(mids, sizes)]
    if levels is None:
        levels = table.metadata.get("levels") if table.metadata else None
    return bootstrap_table(mids, levels, repetitions, rng_seed, n_jobs=n_jobs)


def holdout_mse(
    table: LookupTable,
    coeffs: BCoefficients,
    shape: SigmoidShape = DEFAULT_SHAPE,
    method="function",
    holdout: LookupTable = None,
    repetitions=DEFAULT_REPETITIONS,
    rng_seed=1,
):
    """MSE against fresh rows at the midpoints between adjacent table sizes.

    Parameters
    ----------
    table : LookupTable
        Fitted table; defines the midpoints and serves the table method.
    coeffs, shape
        Sigmoid used by the function method.
    method : {"function", "table"}
    holdout : LookupTable, optional
        Precomputed midpoint rows, e.g. to compare both methods on the same data.
    repetitions, rng_seed
        Used to bootstrap the midpoint rows when ``holdout`` is not given.

    Returns
    -------
    float
    """
    if holdout is None:
        holdout = holdout_table(table, repetitions, rng_seed)
    if method == "function":
        return table_mse(holdout, coeffs, shape)
    if method != "table":
        raise InvalidInputError(f"method must be 'function' or 'table', got {method!r}")
    errs = [pvalue_table(dv, int(n), table) - pv for n, d, p in zip(holdout.sizes, holdout.dips, holdout.ps)
            for dv, pv in zip(d, p)]
    return float(np.mean(np.square(errs)))


@dataclass
class FitReport:
    """Outcome of a full refit.

    Attributes
    ----------
    theta_per_n : dict
        ``n -> (w, h, k, q, r, s, u)``.
    frozen_shape : SigmoidShape
    coeffs : BCoefficients
    mse_total : float
    mse_holdout : float or None
    failed_rows : list of int
        Rows the seven-parameter fit could not handle.
    shape_source : {"mean", "default"}
        Whether the across-N mean or the default shape gave the lower table MSE.
    """

    theta_per_n: Dict[int, tuple]
    frozen_shape: SigmoidShape
    coeffs: BCoefficients
    mse_total: float
    mse_holdout: float = None
    failed_rows: list = field(default_factory=list)
    shape_source: str = "mean"

    def to_json(self):
        doc = {
            "theta_per_n": {str(n): dict(zip(THETA_NAMES, map(float, t))) for n, t in self.theta_per_n.items()},
            "frozen_shape": asdict(self.frozen_shape),
            "coeffs": asdict(self.coeffs),
            "mse_total": self.mse_total,
            "mse_holdout": self.mse_holdout,
            "failed_rows": list(self.failed_rows),
            "shape_source": self.shape_source,
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def save(self, path):
        _atomic_write_text(path, self.to_json())

    @classmethod
    def from_json(cls, text):
        doc = json.loads(text)
        return cls(
            {int(n): tuple(t[k] for k in THETA_NAMES) for n, t in doc["theta_per_n"].items()},
            SigmoidShape(**doc["frozen_shape"]),
            BCoefficients(**doc["coeffs"]),
            doc["mse_total"],
            doc["mse_holdout"],
            doc.get("failed_rows", []),
            doc.get("shape_source", "mean"),
        )


def refit(table: LookupTable, holdout_repetitions=0, rng_seed=1) -> FitReport:
    """Per-N seven-parameter fits, shape freezing and the final ``(b1, b2)`` fit.

    Rows that cannot be fitted are listed in ``failed_rows`` and left out of
    the frozen shape. The across-N mean shape is kept only if its table MSE,
    after fitting ``(b1, b2)``, beats the default shape.

    Parameters
    ----------
    table : LookupTable
    holdout_repetitions : int, default=0
        Repetitions of the midpoint holdout rows; 0 skips the holdout.
    rng_seed : int, default=1
        Seed of the holdout rows.

    Returns
    -------
    FitReport
    """
    thetas, failed = {}, []
    for n, d, p in zip(table.sizes, table.dips, table.ps):
        try:
            thetas[int(n)] = tuple(float(v) for v in fit_theta_per_n(d, p, int(n)))
        except FitError as exc:
            logger.warning("row n=%d not fitted: %s", n, exc)
            failed.append(int(n))
    candidates = []
    try:
        mean_shape = freeze_shape(thetas)
        candidates.append(("mean", mean_shape, fit_b(table, mean_shape)))
    except (InvalidInputError, FitError) as exc:
        logger.warning("mean shape unusable: %s", exc)
    # the free fits are weakly identified; never return a shape worse than the default
    candidates.append(("default", DEFAULT_SHAPE, fit_b(table, DEFAULT_SHAPE)))
    source, shape, coeffs = min(candidates, key=lambda c: table_mse(table, c[2], c[1]))
    mse_hold = None
    if holdout_repetitions:
        mse_hold = holdout_mse(table, coeffs, shape, repetitions=holdout_repetitions, rng_seed=rng_seed)
    return FitReport(thetas, shape, coeffs, table_mse(table, coeffs, shape), mse_hold, failed, source)
