"""Conversion of Dip values to p-values.

Three interchangeable back-ends are provided: a closed-form sigmoid in the
Dip with a sample-size dependent slope, linear interpolation in a
bootstrapped look-up table, and direct Monte-Carlo simulation under the
uniform null.
"""
import csv
import functools
import io
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from ._dip_kernel import uniform_null_dips
from ._validation import InvalidInputError, OutOfRangeError, check_positive_int

TABLE_ENV_VAR = "DIPKIT_TABLE"
METHODS = ("function", "table", "bootstrap")
# repetitions drawn per independent random stream; fixing it makes bootstrap
# results independent of the number of worker threads
_CHUNK = 256


@dataclass(frozen=True)
class SigmoidShape:
    """Shape constants of the two-term sigmoid.

    Parameters
    ----------
    w : float
        Mixture weight of the first term, in (0, 1).
    h, k : float
        Curvatures of the first and second term, both positive.
    s, u : float
        Shifts of the first and second exponent.
    """

    w: float = 0.6
    h: float = 1.6
    k: float = 0.2
    s: float = 6.5
    u: float = 6.5

    def __post_init__(self):
        if not 0.0 < self.w < 1.0:
            raise InvalidInputError(f"w must lie in (0, 1), got {self.w}")
        if not (self.h > 0.0 and self.k > 0.0):
            raise InvalidInputError("h and k must be positive")
        if not (np.isfinite(self.s) and np.isfinite(self.u)):
            raise InvalidInputError("s and u must be finite")


@dataclass(frozen=True)
class BCoefficients:
    """Coefficients of the slope ``b(n) = b1 * sqrt(n) + b2``."""

    b1: float = 17.30784
    b2: float = 12.04918

    def __post_init__(self):
        if not self.b1 > 0.0:
            raise InvalidInputError(f"b1 must be positive, got {self.b1}")
        if not np.isfinite(self.b2):
            raise InvalidInputError("b2 must be finite")


DEFAULT_SHAPE = SigmoidShape()
DEFAULT_COEFFS = BCoefficients()


def b_of_n(n, coeffs: BCoefficients = DEFAULT_COEFFS):
    """Slope of the sigmoid for sample size ``n``.

    Parameters
    ----------
    n : int or array-like of int
        Sample size(s), at least 1.
    coeffs : BCoefficients

    Returns
    -------
    float or ndarray
    """
    arr = np.asarray(n)
    if np.any(arr < 1):
        raise InvalidInputError(f"n must be >= 1, got {n}")
    out = coeffs.b1 * np.sqrt(arr.astype(np.float64)) + coeffs.b2
    return float(out) if out.ndim == 0 else out


def _bracket_minus_one(dip, b, shape):
    """Return ``(B - 1, B)`` for the sigmoid bracket ``B`` without cancellation."""
    e_s = np.exp(-b * dip + shape.s)
    e_u = np.exp(-b * dip + shape.u)
    bm1 = shape.w * np.expm1(np.log1p(shape.h * e_s) / shape.h) + (1.0 - shape.w) * np.expm1(
        np.log1p(shape.k * e_u) / shape.k
    )
    return bm1, bm1 + 1.0


def sigmoid_pvalue(dip, b, shape: SigmoidShape = DEFAULT_SHAPE):
    """Vectorized sigmoid ``p`` for explicit slope(s) ``b``; no range checks."""
    dip = np.asarray(dip, dtype=np.float64)
    with np.errstate(over="ignore"):
        bm1, bb = _bracket_minus_one(dip, np.asarray(b, dtype=np.float64), shape)
        p = np.where(np.isinf(bb), 1.0, bm1 / bb)
    p = np.clip(p, 0.0, 1.0)
    return float(p) if p.ndim == 0 else p


def sigmoid_dpdd(dip, b, shape: SigmoidShape = DEFAULT_SHAPE):
    """Derivative of :func:`sigmoid_pvalue` with respect to the Dip."""
    dip = float(dip)
    e_s = np.exp(-b * dip + shape.s)
    e_u = np.exp(-b * dip + shape.u)
    t1 = (1.0 + shape.h * e_s) ** (1.0 / shape.h)
    t2 = (1.0 + shape.k * e_u) ** (1.0 / shape.k)
    bracket = shape.w * t1 + (1.0 - shape.w) * t2
    inner = shape.w * e_s * (1.0 + shape.h * e_s) ** (1.0 / shape.h - 1.0) + (1.0 - shape.w) * e_u * (
        1.0 + shape.k * e_u
    ) ** (1.0 / shape.k - 1.0)
    return float(-b * inner / bracket**2)


def _check_dip(dip, degenerate):
    d = float(dip)
    if degenerate and d == 0.0:
        return d
    if not (0.0 < d <= 0.25):
        raise InvalidInputError(f"dip must lie in (0, 0.25], got {dip}")
    return d


def pvalue_function(
    dip, n, shape: SigmoidShape = DEFAULT_SHAPE, coeffs: BCoefficients = DEFAULT_COEFFS, degenerate=False
):
    """Dip p-value from the closed-form sigmoid.

    Parameters
    ----------
    dip : float
        Dip value in (0, 0.25]. A zero Dip is accepted only together with
        ``degenerate=True`` and maps to ``p = 1``.
    n : int
        Sample size.
    shape : SigmoidShape
    coeffs : BCoefficients
    degenerate : bool, default=False

    Returns
    -------
    float
        p-value in [0, 1].
    """
    n = check_positive_int(n, "n")
    d = _check_dip(dip, degenerate)
    if d == 0.0:
        return 1.0
    return sigmoid_pvalue(d, b_of_n(n, coeffs), shape)


@dataclass
class LookupTable:
    """Bootstrapped (dip, p) pairs for a set of sample sizes.

    Attributes
    ----------
    sizes : ndarray of int
        Ascending sample sizes.
    dips, ps : list of ndarray
        Per size, dips strictly increasing and p non-increasing.
    metadata : dict
        Provenance such as repetitions, seed and the quantile-level grid.
    """

    sizes: np.ndarray
    dips: list
    ps: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sizes = np.asarray(self.sizes, dtype=np.int64)
        self.dips = [np.asarray(d, dtype=np.float64) for d in self.dips]
        self.ps = [np.asarray(p, dtype=np.float64) for p in self.ps]
        if self.sizes.ndim != 1 or self.sizes.size == 0:
            raise InvalidInputError("table needs at least one sample size")
        if len(self.dips) != self.sizes.size or len(self.ps) != self.sizes.size:
            raise InvalidInputError("table rows do not match the sizes")
        if np.any(np.diff(self.sizes) <= 0) or self.sizes[0] < 1:
            raise InvalidInputError("table sizes must be positive and strictly increasing")
        for n, d, p in zip(self.sizes, self.dips, self.ps):
            if d.size == 0 or d.shape != p.shape:
                raise InvalidInputError(f"row n={n} is empty or ragged")
            if np.any(np.diff(d) <= 0) or np.any(np.diff(p) > 0):
                raise InvalidInputError(f"row n={n} must have increasing dip and non-increasing p")
            if np.any((p < 0) | (p > 1)) or np.any((d <= 0) | (d > 0.25)):
                raise InvalidInputError(f"row n={n} has values out of range")

    @property
    def max_n(self):
        return int(self.sizes[-1])

    def row(self, n):
        i = int(np.searchsorted(self.sizes, n))
        if i == self.sizes.size or self.sizes[i] != n:
            raise KeyError(n)
        return self.dips[i], self.ps[i]

    def to_csv(self, path):
        """Write the table as ``n,dip,p`` CSV with a sidecar ``.meta.json``."""
        path = Path(path)
        _atomic_write_text(path, self.to_csv_text())
        _atomic_write_text(_meta_path(path), json.dumps(self.metadata, indent=2, sort_keys=True) + "\n")

    def to_csv_text(self):
        buf = io.StringIO()
        buf.write("n,dip,p\n")
        for n, d, p in zip(self.sizes, self.dips, self.ps):
            for di, pi in zip(d, p):
                buf.write(f"{int(n)},{di:.17g},{pi:.17g}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, path):
        """Read a table written by :meth:`to_csv`."""
        path = Path(path)
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                reader = csv.reader(fh)
                header = next(reader, None)
                if header is None or [h.strip() for h in header] != ["n", "dip", "p"]:
                    raise InvalidInputError(f"{path}: expected header 'n,dip,p'")
                rows = [(int(r[0]), float(r[1]), float(r[2])) for r in reader if r]
        except (OSError, ValueError, IndexError) as exc:
            if isinstance(exc, InvalidInputError):
                raise
            raise InvalidInputError(f"cannot read table {path}: {exc}") from exc
        if not rows:
            raise InvalidInputError(f"{path}: table has no rows")
        arr = np.array(rows)
        ns = arr[:, 0].astype(np.int64)
        sizes = np.unique(ns)
        dips = [arr[ns == n, 1] for n in sizes]
        ps = [arr[ns == n, 2] for n in sizes]
        meta = {}
        mp = _meta_path(path)
        if mp.exists():
            meta = json.loads(mp.read_text(encoding="utf-8"))
        return cls(sizes, dips, ps, meta)


def _meta_path(path):
    return path.with_name(path.stem + ".meta.json")


def _atomic_write_text(path, text):
    path = Path(path)
    tmp = path.with_name(f".{path.name}.{os.getpid()}.tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


def default_table_path():
    """Path of the table used when none is given: ``$DIPKIT_TABLE`` or the shipped one."""
    env = os.environ.get(TABLE_ENV_VAR)
    if env:
        return Path(env)
    return Path(str(resources.files("dipkit") / "data" / "dip_table.csv"))


@functools.lru_cache(maxsize=4)
def _load_table_cached(path_str, mtime):
    return LookupTable.from_csv(path_str)


def load_table(path=None) -> LookupTable:
    """Load a look-up table, defaulting to :func:`default_table_path`."""
    p = Path(path) if path is not None else default_table_path()
    if not p.exists():
        raise InvalidInputError(f"table file not found: {p}")
    return _load_table_cached(str(p), p.stat().st_mtime_ns)


def _row_on_levels(d, p, levels):
    """Dip of one row at the given p levels (levels ascending)."""
    # rows store p descending; np.interp needs ascending abscissae
    return np.interp(levels, p[::-1], d[::-1])


def interpolated_row(table: LookupTable, n):
    """Row of (dip, p) pairs for size ``n``, interpolated linearly in sqrt(n).

    Returns
    -------
    dips : ndarray
        Ascending.
    ps : ndarray
        Descending p levels matching ``dips``.
    """
    n = check_positive_int(n, "n")
    if n > table.max_n:
        raise OutOfRangeError(f"n={n} exceeds the largest table size {table.max_n}")
    sizes = table.sizes
    if n <= sizes[0]:
        return table.dips[0], table.ps[0]
    hi = int(np.searchsorted(sizes, n))
    if sizes[hi] == n:
        return table.dips[hi], table.ps[hi]
    lo = hi - 1
    t = (np.sqrt(n) - np.sqrt(sizes[lo])) / (np.sqrt(sizes[hi]) - np.sqrt(sizes[lo]))
    d_lo, p_lo, d_hi, p_hi = table.dips[lo], table.ps[lo], table.dips[hi], table.ps[hi]
    if p_lo.shape == p_hi.shape and np.array_equal(p_lo, p_hi):
        return (1.0 - t) * d_lo + t * d_hi, p_lo
    levels = np.union1d(p_lo, p_hi)
    dl = _row_on_levels(d_lo, p_lo, levels)
    dh = _row_on_levels(d_hi, p_hi, levels)
    return ((1.0 - t) * dl + t * dh)[::-1], levels[::-1]


def pvalue_table(dip, n, table: LookupTable = None, degenerate=False):
    """Dip p-value by interpolation in a bootstrapped look-up table.

    Parameters
    ----------
    dip : float
        Dip value in (0, 0.25].
    n : int
        Sample size, at most the largest size in ``table``.
    table : LookupTable, optional
        Defaults to the shipped table.

    Returns
    -------
    float
    """
    d = _check_dip(dip, degenerate)
    if d == 0.0:
        return 1.0
    if table is None:
        table = load_table()
    dips, ps = interpolated_row(table, n)
    if d < dips[0]:
        return 1.0
    if d > dips[-1]:
        return 0.0
    # abscissae must be increasing; equal neighbours after interpolation are harmless
    return float(np.clip(np.interp(d, dips, ps), 0.0, 1.0))


def _chunk_dips(n, count, seed_seq):
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    return uniform_null_dips(rng.random((count, n)))


def simulate_null_dips(n, repetitions, seed=0, n_jobs=1):
    """Dips of ``repetitions`` uniform samples of size ``n``.

    Repetitions are split into fixed-size chunks, each drawn from its own
    stream spawned from ``seed``, so the result does not depend on
    ``n_jobs``.

    Returns
    -------
    ndarray of shape (repetitions,)
        Dips in simulation order.
    """
    n = check_positive_int(n, "n")
    repetitions = check_positive_int(repetitions, "repetitions")
    n_chunks = -(-repetitions // _CHUNK)
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    counts = [min(_CHUNK, repetitions - i * _CHUNK) for i in range(n_chunks)]
    if n_jobs == 1 or n_chunks == 1:
        parts = [_chunk_dips(n, c, s) for c, s in zip(counts, children)]
    else:
        with ThreadPoolExecutor(max_workers=n_jobs) as ex:
            parts = list(ex.map(lambda cs: _chunk_dips(n, *cs), zip(counts, children)))
    return np.concatenate(parts)


@functools.lru_cache(maxsize=64)
def _sorted_null_dips(n, repetitions, seed):
    d = np.sort(simulate_null_dips(n, repetitions, seed))
    d.setflags(write=False)
    return d


def bootstrap_dips(n, repetitions, seed=0):
    """Sorted null dips for ``(n, repetitions, seed)``, memoized."""
    return _sorted_null_dips(check_positive_int(n, "n"), check_positive_int(repetitions, "repetitions"), int(seed))


def pvalue_bootstrap(dip, n, repetitions=1000, rng_seed=0, degenerate=False, cache=True):
    """Dip p-value as the share of uniform-null dips at least as large as ``dip``.

    Parameters
    ----------
    dip : float
    n : int
    repetitions : int, default=1000
    rng_seed : int, default=0
    cache : bool, default=True
        Reuse simulated dips across calls with the same ``(n, repetitions, seed)``.

    Returns
    -------
    float
    """
    d = _check_dip(dip, degenerate)
    if d == 0.0:
        return 1.0
    if cache:
        null = bootstrap_dips(n, repetitions, rng_seed)
    else:
        null = np.sort(simulate_null_dips(n, repetitions, rng_seed))
    return float((null.size - np.searchsorted(null, d, side="left")) / null.size)


@dataclass(frozen=True)
class PValueConfig:
    """Choice of p-value back-end and its settings."""

    method: str = "function"
    shape: SigmoidShape = DEFAULT_SHAPE
    coeffs: BCoefficients = DEFAULT_COEFFS
    table: object = None
    repetitions: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise InvalidInputError(f"method must be one of {METHODS}, got {self.method!r}")


def dip_pvalue(dip, n, config: PValueConfig = None, degenerate=False):
    """Dispatch to the back-end selected in ``config`` (function by default)."""
    cfg = config if config is not None else PValueConfig()
    if cfg.method == "function":
        return pvalue_function(dip, n, cfg.shape, cfg.coeffs, degenerate=degenerate)
    if cfg.method == "table":
        table = cfg.table
        if table is None or isinstance(table, (str, os.PathLike)):
            table = load_table(table)
        return pvalue_table(dip, n, table, degenerate=degenerate)
    return pvalue_bootstrap(dip, n, cfg.repetitions, cfg.seed, degenerate=degenerate)
