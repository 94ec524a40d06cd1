"""Synthetic scenarios, NMI and the p-value runtime benchmark."""
import io
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy import stats

from ._validation import InvalidInputError, check_positive_int
from .dip import compute_dip
from .pvalue import LookupTable, load_table, pvalue_bootstrap, pvalue_function, pvalue_table

# family -> (scipy distribution, number of shape parameters)
_FAMILIES = {
    "normal": (stats.norm, 0),
    "student_t": (stats.t, 1),
    "laplace": (stats.laplace, 0),
    "uniform": (stats.uniform, 0),
    "gamma": (stats.gamma, 1),
    "exponential": (stats.expon, 0),
    "beta": (stats.beta, 2),
    "noncentral_t": (stats.nct, 2),
}


@dataclass(frozen=True)
class DistributionSpec:
    """A distribution family with scipy-style ``(shapes..., loc, scale)`` parameters.

    Parameters
    ----------
    family : str
        One of normal, student_t, laplace, uniform, gamma, exponential, beta,
        noncentral_t.
    params : tuple of float
        Shape parameters followed by location and scale.
    second : DistributionSpec, optional
        Second component of a half/half union.
    """

    family: str
    params: Tuple[float, ...]
    second: Optional["DistributionSpec"] = None

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise InvalidInputError(f"unknown family {self.family!r}")
        _, n_shapes = _FAMILIES[self.family]
        if len(self.params) != n_shapes + 2:
            raise InvalidInputError(f"{self.family} needs {n_shapes + 2} parameters, got {len(self.params)}")
        if not self.params[-1] > 0:
            raise InvalidInputError("scale must be positive")
        if any(not s > 0 for s in self.params[:n_shapes] if self.family != "noncentral_t") or (
            self.family == "noncentral_t" and not self.params[0] > 0
        ):
            raise InvalidInputError("shape parameters and degrees of freedom must be positive")

    def frozen(self):
        dist, n_shapes = _FAMILIES[self.family]
        shapes = self.params[:n_shapes]
        loc, scale = self.params[n_shapes:]
        return dist(*shapes, loc=loc, scale=scale)


def _spec(family, *params):
    return DistributionSpec(family, tuple(float(p) for p in params))


_BASE = _spec("normal", 4, 1)
_UNIMODAL = {
    "N(4,1)": _BASE,
    "T(4,0,1)": _spec("student_t", 4, 0, 1),
    "L(0,2)": _spec("laplace", 0, 2),
    "U(0,2)": _spec("uniform", 0, 2),
    "G(2,-1,1)": _spec("gamma", 2, -1, 1),
    "E(0,1)": _spec("exponential", 0, 1),
    "B(2,2,1,1)": _spec("beta", 2, 2, 1, 1),
    "Tnc(4,2,0,1)": _spec("noncentral_t", 4, 2, 0, 1),
}
_PARTNERS = {
    "N(4,1)": ("N(0,1)", _spec("normal", 0, 1)),
    "T(4,0,1)": ("T(4,4,1)", _spec("student_t", 4, 4, 1)),
    "L(0,2)": ("L(7,2)", _spec("laplace", 7, 2)),
    "U(0,2)": ("U(3,2)", _spec("uniform", 3, 2)),
    "G(2,-1,1)": ("G(2,5,1)", _spec("gamma", 2, 5, 1)),
    "E(0,1)": ("E(4,1)", _spec("exponential", 4, 1)),
    "B(2,2,1,1)": ("B(2,2,2,1)", _spec("beta", 2, 2, 2, 1)),
    "Tnc(4,2,0,1)": ("Tnc(4,2,7,1)", _spec("noncentral_t", 4, 2, 7, 1)),
}


def _union(a, b):
    return DistributionSpec(a.family, a.params, b)


def _build_scenarios():
    out = dict(_UNIMODAL)
    for name, spec in _UNIMODAL.items():
        pname, pspec = _PARTNERS[name]
        out[f"{name} u {pname}"] = _union(spec, pspec)
    for name, spec in _UNIMODAL.items():
        if name != "N(4,1)":
            out[f"N(4,1) u {name}"] = _union(_BASE, spec)
    return out


SCENARIOS = _build_scenarios()
"""The 23 scenarios: 8 unimodal, 8 same-family unions, 7 unions with N(4,1)."""


def generate(spec: DistributionSpec, n, rng_seed=0):
    """Draw ``n`` points from ``spec``.

    Unions take ``ceil(n/2)`` points from the first and ``floor(n/2)`` from
    the second component.

    Returns
    -------
    values : ndarray of shape (n,)
    labels : ndarray of shape (n,)
        Component index of each point (all zero for a single component).
    """
    n = check_positive_int(n, "n")
    rng = np.random.default_rng(rng_seed)
    if spec.second is None:
        return spec.frozen().rvs(size=n, random_state=rng), np.zeros(n, dtype=np.int64)
    n1 = n - n // 2
    a = spec.frozen().rvs(size=n1, random_state=rng)
    b = spec.second.frozen().rvs(size=n // 2, random_state=rng)
    return np.concatenate([a, b]), np.repeat(np.array([0, 1], dtype=np.int64), [n1, n // 2])


def _entropy(counts, n):
    p = counts[counts > 0] / n
    return -math.fsum(p * np.log(p))


def nmi(a, b):
    """Normalized mutual information with arithmetic-mean normalization.

    Noise labels are treated as one more cluster.

    Parameters
    ----------
    a, b : array-like of int
        Labelings of equal length.

    Returns
    -------
    float
        Value in [0, 1].
    """
    a = np.asarray(getattr(a, "labels", a)).reshape(-1)
    b = np.asarray(getattr(b, "labels", b)).reshape(-1)
    if a.shape != b.shape:
        raise InvalidInputError("labelings differ in length")
    n = a.size
    if n == 0:
        raise InvalidInputError("labelings are empty")
    _, ia = np.unique(a, return_inverse=True)
    _, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1))
    np.add.at(table, (ia, ib), 1.0)
    ha = _entropy(table.sum(axis=1), n)
    hb = _entropy(table.sum(axis=0), n)
    if ha == 0.0 and hb == 0.0:
        return 1.0
    if ha == 0.0 or hb == 0.0:
        return 0.0
    # exactly rounded sums keep the score symmetric in its arguments
    pij = table[table > 0] / n
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))[table > 0] / n**2
    mi = math.fsum(pij * np.log(pij / outer))
    return float(min(1.0, max(0.0, mi / (0.5 * (ha + hb)))))


def make_synth(rng_seed=0, n_per_cluster=900, d=8, spread=1.0, rotate=True):
    """Seven Gaussian clusters in ``d`` dimensions with a two-level structure.

    One direction separates four groups. A second direction splits the
    first group into three clusters and the second group into two. All
    other directions carry unimodal noise. A random rotation hides the
    structure from the coordinate axes.

    Returns
    -------
    X : ndarray of shape (7 * n_per_cluster, d)
    labels : ndarray of shape (7 * n_per_cluster,)
    """
    if d < 2:
        raise InvalidInputError("d must be at least 2")
    rng = np.random.default_rng(rng_seed)
    centers_2d = [(0, -10), (0, 0), (0, 10), (12, -5), (12, 5), (24, 0), (36, 0)]
    blocks, labels = [], []
    for c, (u, v) in enumerate(centers_2d):
        pts = rng.normal(0.0, spread, (n_per_cluster, d))
        pts[:, 0] += u
        pts[:, 1] += v
        blocks.append(pts)
        labels.append(np.full(n_per_cluster, c, dtype=np.int64))
    X = np.vstack(blocks)
    if rotate:
        q, r = np.linalg.qr(rng.standard_normal((d, d)))
        X = X @ (q * np.sign(np.diag(r)))
    return X, np.concatenate(labels)


@dataclass
class BenchReport:
    """Wall-clock totals of the p-value back-ends.

    Attributes
    ----------
    rows : list of dict
        One entry per (method, n, scenario) with keys ``method``, ``n``,
        ``scenario``, ``seconds`` (None when unavailable), ``count`` and
        ``available``.
    """

    rows: list = field(default_factory=list)

    def totals(self):
        """Summed seconds per ``(method, n)`` over available cells."""
        out = {}
        for r in self.rows:
            if r["available"]:
                key = (r["method"], r["n"])
                out[key] = out.get(key, 0.0) + r["seconds"]
        return out

    def to_csv(self, with_seconds=True):
        buf = io.StringIO()
        buf.write("method,n,scenario,seconds\n")
        for r in self.rows:
            if not r["available"]:
                sec = "unavailable"
            elif with_seconds:
                sec = f"{r['seconds']:.6g}"
            else:
                sec = "timed"
            buf.write(f"{r['method']},{r['n']},{r['scenario']},{sec}\n")
        return buf.getvalue()

    def summary(self):
        lines = []
        for (method, n), sec in sorted(self.totals().items(), key=lambda kv: (kv[0][1], kv[0][0])):
            lines.append(f"{method:>9s} n={n:<7d} {sec:.4g}s")
        for r in self.rows:
            if not r["available"]:
                lines.append(f"{r['method']:>9s} n={r['n']:<7d} unavailable ({r['scenario']})")
        return "\n".join(lines)


def bench_pvalue_methods(
    scenarios,
    sizes,
    repetitions_per_cell=100,
    bootstrap_reps=1000,
    rng_seed=0,
    table: LookupTable = None,
    methods=("function", "table", "bootstrap"),
):
    """Time the three p-value back-ends.

    Function and table timings cover only the Dip to p conversion. The
    bootstrap timing includes simulating its null distribution for every
    call.

    Parameters
    ----------
    scenarios : sequence of (str, DistributionSpec)
    sizes : sequence of int
    repetitions_per_cell : int, default=100
        p-values computed per (scenario, n) and method.
    bootstrap_reps : int, default=1000
    rng_seed : int, default=0
    table : LookupTable, optional
        Defaults to the shipped table.
    methods : sequence of str

    Returns
    -------
    BenchReport
    """
    scenarios = list(scenarios)
    report = BenchReport()
    if not scenarios:
        return report
    reps = check_positive_int(repetitions_per_cell, "repetitions_per_cell")
    if "table" in methods and table is None:
        table = load_table()
    # warm-up so compilation and caches stay out of the timed region
    pvalue_function(0.05, 100)
    if "table" in methods:
        pvalue_table(0.05, min(100, table.max_n), table)
    if "bootstrap" in methods:
        pvalue_bootstrap(0.05, 10, 2, 0, cache=False)
    for n in sizes:
        n = check_positive_int(n, "n")
        for s_idx, (name, spec) in enumerate(scenarios):
            dips = []
            for r in range(reps):
                x, _ = generate(spec, n, (rng_seed, s_idx, n, r))
                res = compute_dip(np.sort(x))
                dips.append((res.dip, res.degenerate))
            for method in methods:
                if method == "table" and n > table.max_n:
                    report.rows.append(dict(method=method, n=n, scenario=name, seconds=None, count=0, available=False))
                    continue
                t0 = time.perf_counter()
                for r, (dip, deg) in enumerate(dips):
                    if method == "function":
                        pvalue_function(dip, n, degenerate=deg)
                    elif method == "table":
                        pvalue_table(dip, n, table, degenerate=deg)
                    else:
                        pvalue_bootstrap(dip, n, bootstrap_reps, rng_seed + r, degenerate=deg, cache=False)
                elapsed = time.perf_counter() - t0
                report.rows.append(
                    dict(method=method, n=n, scenario=name, seconds=elapsed, count=reps, available=True)
                )
    return report
