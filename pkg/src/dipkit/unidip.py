"""One-dimensional Dip-based clustering: UniDip, TailoredDip and noise assignment."""
import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin
from sklearn.utils import check_array

from ._validation import InvalidInputError, as_sample, check_open_unit
from .dip import compute_dip
from .pvalue import METHODS, PValueConfig, dip_pvalue

logger = logging.getLogger(__name__)

NOISE = -1
# segments this small carry no usable Dip information and count as unimodal
_MIN_TEST_SIZE = 4


@dataclass(frozen=True)
class SignificanceConfig:
    """Significance level and p-value back-end used by the clusterers.

    Parameters
    ----------
    alpha : float, default=0.01
    method : {"function", "table", "bootstrap"}, default="function"
    table : LookupTable or path, optional
        Table for ``method="table"``; the shipped table if omitted.
    repetitions, seed : int
        Bootstrap settings for ``method="bootstrap"``.
    """

    alpha: float = 0.01
    method: str = "function"
    table: object = None
    repetitions: int = 1000
    seed: int = 0
    _pv: PValueConfig = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        check_open_unit(self.alpha, "alpha")
        if self.method not in METHODS:
            raise InvalidInputError(f"method must be one of {METHODS}, got {self.method!r}")
        cfg = PValueConfig(method=self.method, table=self.table, repetitions=self.repetitions, seed=self.seed)
        object.__setattr__(self, "_pv", cfg)

    def pvalue(self, values):
        """p-value of a sorted sample; samples below four points count as unimodal."""
        if values.shape[0] < _MIN_TEST_SIZE:
            return 1.0
        res = compute_dip(values)
        return dip_pvalue(res.dip, res.n, self._pv, degenerate=res.degenerate)


@dataclass(frozen=True)
class ClusterLabels:
    """Integer labels with ``-1`` for noise and ``k`` clusters numbered ``0..k-1``."""

    labels: np.ndarray
    k: int


def mirror(values, pivot="left"):
    """Reflect a sorted sample about one of its end points.

    The pivot itself appears once, so ``m`` values become ``2m - 1``.

    Parameters
    ----------
    values : ndarray
        Sorted sample.
    pivot : {"left", "right"}

    Returns
    -------
    ndarray
        Sorted mirrored sample.
    """
    if pivot == "left":
        g0 = values[0]
        return np.concatenate([(2.0 * g0 - values[1:])[::-1], values])
    if pivot == "right":
        gm = values[-1]
        return np.concatenate([values, (2.0 * gm - values[:-1])[::-1]])
    raise InvalidInputError(f"pivot must be 'left' or 'right', got {pivot!r}")


def _check_sorted(x):
    if np.any(x[1:] < x[:-1]):
        raise InvalidInputError("sample must be sorted in non-decreasing order")


def _unidip_ranges(x, start, end, is_modal, cfg):
    """Half-open index ranges of the modal clusters inside ``x[start:end]``."""
    seg = x[start:end]
    if seg.shape[0] < _MIN_TEST_SIZE:
        return [(start, end)]
    res = compute_dip(seg)
    p = dip_pvalue(res.dip, res.n, cfg._pv)
    lo, hi = res.modal_interval
    if p >= cfg.alpha:
        return [(start, end)] if is_modal else [(start + lo, start + hi + 1)]
    modal = _unidip_ranges(x, start + lo, start + hi + 1, True, cfg)

    # each flank is tested together with the neighbouring cluster so a lone
    # tail reads as unimodal while a further mode does not
    left = []
    if lo > 0 and cfg.pvalue(x[start : modal[0][1]]) <= cfg.alpha:
        left = _unidip_ranges(x, start, start + lo, False, cfg)
    right = []
    if start + hi + 1 < end and cfg.pvalue(x[modal[-1][0] : end]) <= cfg.alpha:
        right = _unidip_ranges(x, start + hi + 1, end, False, cfg)
    return left + modal + right


def _merge_unimodal_neighbours(x, ranges, cfg):
    """Join consecutive intervals whose union, gap included, passes the Dip-test.

    Cutting a flank at the edge of a found cluster leaves that cluster's tail
    as a steep ramp at the segment border, which the recursion reports as a
    separate mode. Such fragments are reunited here.
    """
    out = [list(r) for r in ranges]
    i = 0
    while i < len(out) - 1:
        if cfg.pvalue(x[out[i][0] : out[i + 1][1]]) >= cfg.alpha:
            out[i][1] = out[i + 1][1]
            del out[i + 1]
            i = max(i - 1, 0)
        else:
            i += 1
    return [tuple(r) for r in out]


def _unidip_clusters(x, cfg):
    return _merge_unimodal_neighbours(x, _unidip_ranges(x, 0, x.shape[0], False, cfg), cfg)


def _ranges_to_labels(n, ranges):
    labels = np.full(n, NOISE, dtype=np.int64)
    for c, (s, e) in enumerate(ranges):
        labels[s:e] = c
    return ClusterLabels(labels, len(ranges))


def _labels_to_ranges(labels):
    k = int(labels.max()) + 1 if labels.size and labels.max() >= 0 else 0
    ranges = []
    for c in range(k):
        idx = np.flatnonzero(labels == c)
        if idx.size == 0 or idx[-1] - idx[0] + 1 != idx.size:
            raise InvalidInputError("clusters must occupy contiguous sorted index ranges")
        ranges.append((int(idx[0]), int(idx[-1]) + 1))
    if any(ranges[i][1] > ranges[i + 1][0] for i in range(len(ranges) - 1)):
        raise InvalidInputError("cluster ids must follow the sorted order")
    return ranges


def unidip(sample, config: SignificanceConfig = None) -> ClusterLabels:
    """Cluster a sorted 1-D sample into modal intervals.

    Parameters
    ----------
    sample : array-like of shape (n,)
        Sorted values.
    config : SignificanceConfig, optional

    Returns
    -------
    ClusterLabels
        Contiguous clusters in sorted order; everything else is ``-1``.
    """
    cfg = config if config is not None else SignificanceConfig()
    x = as_sample(sample)
    _check_sorted(x)
    return _ranges_to_labels(x.shape[0], _unidip_clusters(x, cfg))


def _closest_block(x, rng, count, toward_right):
    """Up to ``count`` samples of cluster ``rng`` nearest to the gap on one side."""
    s, e = rng
    if toward_right:
        return x[max(s, e - count) : e]
    return x[s : min(e, s + count)]


def tailored_dip(sample, config: SignificanceConfig = None) -> ClusterLabels:
    """UniDip followed by a search for cluster tails in the gaps between clusters.

    Every gap, the outer flanks included, is mirrored and tested. Structures
    found in a multimodal gap are merged into the neighbouring cluster when
    the structure combined with the ``2|S|`` nearest cluster samples still
    looks unimodal. After each merge the same gap is examined again.

    Parameters
    ----------
    sample : array-like of shape (n,)
        Sorted values.
    config : SignificanceConfig, optional

    Returns
    -------
    ClusterLabels
    """
    cfg = config if config is not None else SignificanceConfig()
    x = as_sample(sample)
    _check_sorted(x)
    n = x.shape[0]
    clusters = [list(r) for r in _unidip_clusters(x, cfg)]
    k = len(clusters)
    cap = 10 * k
    restarts = 0
    i = 0
    while i <= k:
        g_start = 0 if i == 0 else clusters[i - 1][1]
        g_end = n if i == k else clusters[i][0]
        updated = False
        if g_end - g_start >= _MIN_TEST_SIZE:
            gap = x[g_start:g_end]
            if i == 0:
                # outer flanks are reflected about their far end so a decaying tail shows up as a dip
                p_gap = cfg.pvalue(mirror(gap, "left"))
            elif i == k:
                p_gap = cfg.pvalue(mirror(gap, "right"))
            else:
                # structure may hide next to either neighbour
                p_gap = min(cfg.pvalue(mirror(gap, "left")), cfg.pvalue(mirror(gap, "right")))
            if p_gap < cfg.alpha:
                sub = _unidip_clusters(gap, cfg)
                k_new = len(sub)
                p_first = p_last = -np.inf
                if i != 0:
                    fs, fe = sub[0]
                    near = _closest_block(x, clusters[i - 1], 2 * (fe - fs), True)
                    p_first = cfg.pvalue(np.concatenate([near, gap[:fe]]))
                if i != k:
                    ls, le = sub[-1]
                    near = _closest_block(x, clusters[i], 2 * (le - ls), False)
                    p_last = cfg.pvalue(np.concatenate([gap[ls:], near]))
                if i != 0 and p_first >= cfg.alpha and (k_new != 1 or p_first >= p_last):
                    clusters[i - 1][1] = g_start + sub[0][1]
                    updated = True
                elif i != k and p_last >= cfg.alpha and (k_new != 1 or p_last > p_first):
                    clusters[i][0] = g_start + sub[-1][0]
                    updated = True
        if updated:
            restarts += 1
            if restarts < cap:
                continue
            logger.warning("TailoredDip gap %d re-examined %d times; moving on", i, restarts)
        restarts = 0
        i += 1
    return _ranges_to_labels(n, [tuple(c) for c in clusters])


def _boundary(x, a_end, b_start):
    """Cluster boundary between sorted indices ``a_end`` and ``b_start``.

    The chord from the last point of the left cluster to the first point of
    the right cluster in ECDF coordinates is intersected with the ECDF. The
    crossing closest to the midpoint wins; without a crossing the midpoint
    itself is returned.
    """
    n = x.shape[0]
    xa, xb = x[a_end], x[b_start]
    mid = 0.5 * (xa + xb)
    if xb <= xa:
        return mid
    ya, yb = (a_end + 1) / n, (b_start + 1) / n
    slope = (yb - ya) / (xb - xa)
    j = np.arange(a_end, b_start)
    level = (j + 1) / n
    # chord meets a flat step of height level on [x[j], x[j+1])
    xs = xa + (level - ya) / slope
    flat = (xs > xa) & (xs < xb) & (xs >= x[j]) & (xs < x[j + 1])
    # chord passes through the vertical jump at x[j+1]
    xj = x[j + 1]
    lj = ya + slope * (xj - xa)
    jump = (xj > xa) & (xj < xb) & (lj > level) & (lj < level + 1.0 / n)
    cands = np.concatenate([xs[flat], xj[jump]])
    if cands.size == 0:
        return mid
    return float(cands[np.argmin(np.abs(cands - mid))])


def assign_noise(sample, labels) -> ClusterLabels:
    """Assign every noise point of a sorted sample to a neighbouring cluster.

    Parameters
    ----------
    sample : array-like of shape (n,)
        Sorted values.
    labels : ClusterLabels or array-like
        Contiguous labels in sorted order, ``-1`` for noise.

    Returns
    -------
    ClusterLabels
        Labels without ``-1``.
    """
    x = as_sample(sample)
    _check_sorted(x)
    lab = np.asarray(labels.labels if isinstance(labels, ClusterLabels) else labels, dtype=np.int64)
    if lab.shape != x.shape:
        raise InvalidInputError("labels and sample differ in length")
    ranges = _labels_to_ranges(lab)
    if not ranges:
        raise InvalidInputError("no cluster to assign noise to")
    out = lab.copy()
    out[: ranges[0][0]] = 0
    out[ranges[-1][1] :] = len(ranges) - 1
    for c in range(len(ranges) - 1):
        a_end, b_start = ranges[c][1] - 1, ranges[c + 1][0]
        if b_start - a_end <= 1:
            continue
        cut = _boundary(x, a_end, b_start)
        between = np.arange(a_end + 1, b_start)
        out[between] = np.where(x[between] <= cut, c, c + 1)
    return ClusterLabels(out, len(ranges))


class _OneDimClusterer(ClusterMixin, BaseEstimator):
    def __init__(self, alpha=0.01, pvalue_method="function", table=None, n_boots=1000, random_state=0):
        self.alpha = alpha
        self.pvalue_method = pvalue_method
        self.table = table
        self.n_boots = n_boots
        self.random_state = random_state

    def _config(self):
        seed = self.random_state if isinstance(self.random_state, (int, np.integer)) else 0
        return SignificanceConfig(self.alpha, self.pvalue_method, self.table, self.n_boots, int(seed))

    def _sorted_input(self, X):
        X = check_array(X, ensure_2d=False, dtype=np.float64)
        if X.ndim == 2:
            if X.shape[1] != 1:
                raise InvalidInputError("expected one feature")
            X = X[:, 0]
        order = np.argsort(X, kind="stable")
        return X[order], order

    def _finish(self, order, result):
        labels = np.empty_like(result.labels)
        labels[order] = result.labels
        self.labels_ = labels
        self.n_clusters_ = result.k
        return self


class UniDip(_OneDimClusterer):
    """UniDip clustering of one-dimensional data.

    Parameters
    ----------
    alpha : float, default=0.01
        Significance level of the Dip-test.
    pvalue_method : {"function", "table", "bootstrap"}, default="function"
    table : LookupTable or path, optional
    n_boots : int, default=1000
        Repetitions for the bootstrap back-end.
    random_state : int, default=0
        Seed of the bootstrap back-end.

    Attributes
    ----------
    labels_ : ndarray of shape (n,)
        Cluster ids in input order, ``-1`` for noise.
    n_clusters_ : int
    """

    def fit(self, X, y=None):
        x, order = self._sorted_input(X)
        return self._finish(order, unidip(x, self._config()))


class TailoredDip(_OneDimClusterer):
    """TailoredDip clustering of one-dimensional data.

    Parameters
    ----------
    alpha : float, default=0.01
    pvalue_method : {"function", "table", "bootstrap"}, default="function"
    table : LookupTable or path, optional
    n_boots : int, default=1000
    random_state : int, default=0
    outliers : bool, default=True
        Keep noise labels. With False every point joins a cluster via the
        ECDF-intersection boundary.

    Attributes
    ----------
    labels_ : ndarray of shape (n,)
    n_clusters_ : int
    """

    def __init__(self, alpha=0.01, pvalue_method="function", table=None, n_boots=1000, random_state=0, outliers=True):
        super().__init__(alpha, pvalue_method, table, n_boots, random_state)
        self.outliers = outliers

    def fit(self, X, y=None):
        x, order = self._sorted_input(X)
        res = tailored_dip(x, self._config())
        if not self.outliers:
            res = assign_noise(x, res)
        return self._finish(order, res)
