"""Dip'n'Sub: common-subspace clustering driven by sigmoid Dip p-values."""
import logging
import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, TransformerMixin
from sklearn.utils import check_array
from sklearn.utils.validation import check_is_fitted

from ._validation import InvalidInputError, NoGradientError, as_axis, as_matrix, check_positive_int
from .dip import compute_dip
from .gradient import _triangle_gradient
from .pvalue import DEFAULT_COEFFS, DEFAULT_SHAPE, BCoefficients, SigmoidShape, b_of_n, sigmoid_dpdd, sigmoid_pvalue
from .unidip import ClusterLabels, SignificanceConfig, assign_noise, tailored_dip

logger = logging.getLogger(__name__)

# clusters this small are never split and count as unimodal
_MIN_CLUSTER = 4


@dataclass(frozen=True)
class SgdConfig:
    """Settings of the momentum SGD on the projection axis.

    Parameters
    ----------
    step_size : float, default=0.1
    momentum : float, default=0.95
        In [0, 1).
    max_iters : int, default=200
    convergence_tol : float, default=1e-6
        Stop once the cost changes by less than this between steps.
    """

    step_size: float = 0.1
    momentum: float = 0.95
    max_iters: int = 200
    convergence_tol: float = 1e-6

    def __post_init__(self):
        if not self.step_size > 0:
            raise InvalidInputError("step_size must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise InvalidInputError("momentum must lie in [0, 1)")
        check_positive_int(self.max_iters, "max_iters")
        if not self.convergence_tol > 0:
            raise InvalidInputError("convergence_tol must be positive")


@dataclass
class SubspaceResult:
    """Outcome of :func:`dipnsub`.

    Attributes
    ----------
    labels : ClusterLabels
    axes : ndarray of shape (m, d)
        Accepted axes in original feature coordinates, orthonormal rows.
    projected_data : ndarray of shape (n, m)
        Data expressed along the accepted axes.
    costs : list of float
        Objective value of each accepted axis.
    """

    labels: ClusterLabels
    axes: np.ndarray
    projected_data: np.ndarray
    costs: List[float] = field(default_factory=list)


def _as_labels(labels, n):
    lab = np.asarray(labels.labels if isinstance(labels, ClusterLabels) else labels, dtype=np.int64).reshape(-1)
    if lab.shape[0] != n:
        raise InvalidInputError("labels and data differ in length")
    return lab


def _cluster_members(lab):
    return [np.flatnonzero(lab == c) for c in np.unique(lab[lab >= 0])]


def _cluster_terms(X, members, axis, shape, coeffs, with_grad):
    """Per-cluster ``(size, p, grad p)`` on ``axis``."""
    out = []
    for idx in members:
        m = idx.size
        if m < _MIN_CLUSTER:
            out.append((m, 1.0, np.zeros(X.shape[1]) if with_grad else None))
            continue
        Xc = X[idx]
        proj = Xc @ axis
        order = np.argsort(proj, kind="stable")
        y = proj[order]
        res = compute_dip(y)
        b = b_of_n(m, coeffs)
        p = sigmoid_pvalue(res.dip, b, shape)
        g = None
        if with_grad:
            try:
                g = sigmoid_dpdd(res.dip, b, shape) * _triangle_gradient(Xc, y, order, res)
            except NoGradientError:
                logger.debug("cluster of size %d has no modal triangle; zero gradient", m)
                g = np.zeros(X.shape[1])
        out.append((m, p, g))
    return out


def _cost_and_grad(X, members, axis, shape, coeffs, with_grad=True):
    terms = _cluster_terms(X, members, axis, shape, coeffs, with_grad)
    total = sum(t[0] for t in terms)
    cost = sum(t[0] * t[1] for t in terms) / total
    grad = sum(t[0] * t[2] for t in terms) / total if with_grad else None
    return cost, grad


def weighted_pvalue_cost(
    data, labels, axis, shape: SigmoidShape = DEFAULT_SHAPE, coeffs: BCoefficients = DEFAULT_COEFFS
):
    """Cluster-size weighted mean of the sigmoid Dip p-values along ``axis``.

    Parameters
    ----------
    data : array-like of shape (n, d)
    labels : ClusterLabels or array-like of shape (n,)
        Noise points (``-1``) are ignored.
    axis : array-like of shape (d,)

    Returns
    -------
    float
        Value in [0, 1]; clusters below four points contribute ``p = 1``.
    """
    X = as_matrix(data)
    a = as_axis(axis, X.shape[1])
    members = _cluster_members(_as_labels(labels, X.shape[0]))
    if not members:
        raise InvalidInputError("no clustered points")
    return _cost_and_grad(X, members, a, shape, coeffs, with_grad=False)[0]


def n_start_axes(d):
    """Number of feature and of principal start axes, ``max(1, round(ln d))``."""
    return max(1, int(round(math.log(d))))


def principal_axes(X, q):
    """First ``q`` principal directions with a deterministic sign."""
    Xc = X - X.mean(axis=0)
    cov = Xc.T @ Xc / max(X.shape[0] - 1, 1)
    vals, vecs = np.linalg.eigh(cov)
    out = []
    for j in np.argsort(-vals, kind="stable")[:q]:
        v = vecs[:, j]
        if v[np.argmax(np.abs(v))] < 0:
            v = -v
        out.append(v)
    return out


def candidate_axes(data, labels, shape: SigmoidShape = DEFAULT_SHAPE, coeffs: BCoefficients = DEFAULT_COEFFS):
    """Start axes for the SGD: best feature axes plus leading principal axes.

    Returns
    -------
    list of ndarray
        ``q`` unit feature axes with the lowest weighted cost (ties go to the
        lower feature index) followed by the first ``q`` principal axes.
    """
    X = as_matrix(data)
    d = X.shape[1]
    members = _cluster_members(_as_labels(labels, X.shape[0]))
    q = n_start_axes(d)
    eye = np.eye(d)
    costs = np.array([_cost_and_grad(X, members, eye[j], shape, coeffs, with_grad=False)[0] for j in range(d)])
    best = np.argsort(costs, kind="stable")[:q]
    return [eye[j] for j in best] + principal_axes(X, q)


def optimize_axis(
    data,
    labels,
    start,
    sgd: SgdConfig = SgdConfig(),
    shape: SigmoidShape = DEFAULT_SHAPE,
    coeffs: BCoefficients = DEFAULT_COEFFS,
):
    """Minimize the weighted p-value cost over the axis direction with momentum SGD.

    Parameters
    ----------
    data : array-like of shape (n, d)
    labels : ClusterLabels or array-like
    start : array-like of shape (d,)
    sgd : SgdConfig

    Returns
    -------
    axis : ndarray of shape (d,)
        Best unit axis seen.
    cost : float
    """
    X = as_matrix(data)
    rho = as_axis(start, X.shape[1])
    rho = rho / np.linalg.norm(rho)
    members = _cluster_members(_as_labels(labels, X.shape[0]))
    if not members:
        raise InvalidInputError("no clustered points")
    cost, grad = _cost_and_grad(X, members, rho, shape, coeffs)
    best_rho, best_cost = rho.copy(), cost
    velocity = np.zeros_like(rho)
    for _ in range(sgd.max_iters):
        velocity = sgd.momentum * velocity - sgd.step_size * grad
        nxt = rho + velocity
        norm = np.linalg.norm(nxt)
        if norm == 0.0 or not np.isfinite(norm):
            break
        rho = nxt / norm
        new_cost, grad = _cost_and_grad(X, members, rho, shape, coeffs)
        if new_cost < best_cost:
            best_rho, best_cost = rho.copy(), new_cost
        if abs(cost - new_cost) < sgd.convergence_tol:
            break
        cost = new_cost
    return best_rho, float(best_cost)


def complement_basis(axis):
    """Orthonormal basis of the complement of a unit ``axis`` as columns of a d x (d-1) matrix.

    A Householder QR of ``axis`` supplies the completion. Each column is
    flipped so that its largest entry is positive, making the basis
    deterministic.
    """
    a = np.asarray(axis, dtype=np.float64).reshape(-1, 1)
    q, _ = np.linalg.qr(a, mode="complete")
    basis = q[:, 1:]
    lead = basis[np.argmax(np.abs(basis), axis=0), np.arange(basis.shape[1])]
    return basis * np.where(lead < 0, -1.0, 1.0)


def orthogonal_complement(data, axis):
    """Coordinates of the rows of ``data`` in the complement of ``axis``.

    Returns
    -------
    ndarray of shape (n, d - 1)
    """
    X = as_matrix(data)
    a = as_axis(axis, X.shape[1])
    return X @ complement_basis(a / np.linalg.norm(a))


def _split_clusters(proj, lab, members, pvals, cfg, outliers):
    """Refine ``lab`` by TailoredDip on every cluster flagged as multimodal."""
    new = np.full_like(lab, -1)
    next_id = 0
    for idx, p in zip(members, pvals):
        if p < cfg.alpha and idx.size >= _MIN_CLUSTER:
            order = np.argsort(proj[idx], kind="stable")
            y = proj[idx][order]
            sub = tailored_dip(y, cfg)
            if not outliers and sub.k > 0:
                sub = assign_noise(y, sub)
            sub_lab = np.empty(idx.size, dtype=np.int64)
            sub_lab[order] = sub.labels
            keep = sub_lab >= 0
            new[idx[keep]] = sub_lab[keep] + next_id
            next_id += sub.k
        else:
            new[idx] = next_id
            next_id += 1
    return new, next_id


def dipnsub(
    data,
    config: SignificanceConfig = None,
    threshold=0.15,
    sgd: SgdConfig = SgdConfig(),
    shape: SigmoidShape = DEFAULT_SHAPE,
    coeffs: BCoefficients = DEFAULT_COEFFS,
    outliers=False,
) -> SubspaceResult:
    """Find a common subspace and a clustering of ``data``.

    Parameters
    ----------
    data : array-like of shape (n, d)
    config : SignificanceConfig, optional
        Significance level and back-end for the 1-D splits.
    threshold : float, default=0.15
        Minimum share of points that must lie in multimodal clusters for an
        axis to be accepted.
    sgd : SgdConfig
    outliers : bool, default=False
        Keep TailoredDip noise as ``-1`` instead of assigning it.

    Returns
    -------
    SubspaceResult
    """
    cfg = config if config is not None else SignificanceConfig()
    X = as_matrix(data)
    n, d = X.shape
    if n < _MIN_CLUSTER:
        raise InvalidInputError("dipnsub needs at least four samples")
    threshold = float(threshold)
    if not 0.0 < threshold <= 1.0:
        raise InvalidInputError(f"threshold must lie in (0, 1], got {threshold}")
    lab = np.zeros(n, dtype=np.int64)
    k = 1
    basis = np.eye(d)
    work = X.copy()
    axes, projections, costs = [], [], []
    while work.shape[1] >= 1:
        members = _cluster_members(lab)
        if not members:
            break
        best_rho, best_cost = None, np.inf
        for start in candidate_axes(work, lab, shape, coeffs):
            rho, cost = optimize_axis(work, lab, start, sgd, shape, coeffs)
            if cost < best_cost:
                best_rho, best_cost = rho, cost
        terms = _cluster_terms(work, members, best_rho, shape, coeffs, with_grad=False)
        pvals = [t[1] for t in terms]
        multimodal = sum(idx.size for idx, p in zip(members, pvals) if p < cfg.alpha)
        if multimodal / n < threshold:
            break
        proj = work @ best_rho
        lab, k = _split_clusters(proj, lab, members, pvals, cfg, outliers)
        axes.append(basis @ best_rho)
        projections.append(proj)
        costs.append(float(best_cost))
        comp = complement_basis(best_rho)
        work = work @ comp
        basis = basis @ comp
    axes_arr = np.array(axes).reshape(len(axes), d)
    projected = np.column_stack(projections) if projections else np.empty((n, 0))
    return SubspaceResult(ClusterLabels(lab, k), axes_arr, projected, costs)


class DipNSub(TransformerMixin, ClusterMixin, BaseEstimator):
    """Dip'n'Sub common-subspace clustering.

    Parameters
    ----------
    alpha : float, default=0.01
        Significance level of the Dip-test.
    threshold : float, default=0.15
        Share of points that must lie in multimodal clusters to accept an axis.
    step_size : float, default=0.1
    momentum : float, default=0.95
    max_iters : int, default=200
    convergence_tol : float, default=1e-6
    pvalue_method : {"function", "table", "bootstrap"}, default="function"
        Back-end for the TailoredDip splits. The axis search always uses the
        differentiable sigmoid.
    outliers : bool, default=False
        Keep noise labels instead of assigning every point to a cluster.

    Attributes
    ----------
    labels_ : ndarray of shape (n,)
    n_clusters_ : int
    axes_ : ndarray of shape (m, d)
        Orthonormal subspace axes in original coordinates.
    """

    def __init__(
        self,
        alpha=0.01,
        threshold=0.15,
        step_size=0.1,
        momentum=0.95,
        max_iters=200,
        convergence_tol=1e-6,
        pvalue_method="function",
        outliers=False,
    ):
        self.alpha = alpha
        self.threshold = threshold
        self.step_size = step_size
        self.momentum = momentum
        self.max_iters = max_iters
        self.convergence_tol = convergence_tol
        self.pvalue_method = pvalue_method
        self.outliers = outliers

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.float64)
        res = dipnsub(
            X,
            SignificanceConfig(self.alpha, self.pvalue_method),
            self.threshold,
            SgdConfig(self.step_size, self.momentum, self.max_iters, self.convergence_tol),
            outliers=self.outliers,
        )
        self.labels_ = res.labels.labels
        self.n_clusters_ = res.labels.k
        self.axes_ = res.axes
        self.costs_ = res.costs
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        """Project ``X`` onto the learned subspace."""
        check_is_fitted(self, "axes_")
        X = check_array(X, dtype=np.float64)
        if X.shape[1] != self.n_features_in_:
            raise InvalidInputError(f"expected {self.n_features_in_} features, got {X.shape[1]}")
        return X @ self.axes_.T
