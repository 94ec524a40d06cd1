import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dipkit import InvalidInputError, LookupTable, OutOfRangeError, PValueConfig, dip_pvalue
from dipkit.pvalue import (
    BCoefficients,
    SigmoidShape,
    b_of_n,
    bootstrap_dips,
    interpolated_row,
    load_table,
    pvalue_bootstrap,
    pvalue_function,
    pvalue_table,
    sigmoid_dpdd,
    simulate_null_dips,
)
from dipkit.calibration import bootstrap_table

_HYP_TABLE = bootstrap_table([4, 40, 160], repetitions=200, rng_seed=9)

# 50-digit evaluations of the closed form, frozen: (dip, n, p, dp/ddip)
MPMATH_VALUES = [
    (0.25, 2, 0.067096314340650761655, -2.2866442678517920844),
    (0.05, 500, 1.4366251265007892538e-6, -0.0005733048854330966867),
    (0.01, 100, 0.99999950263473416685, -0.00043934612201637214006),
    (0.1, 50, 0.00096402563694351886268, -0.12947051453008345871),
]


@pytest.mark.parametrize("n,expected", [(1, 29.35702), (100, 185.12758), (4, 46.66486)])
def test_b_of_n(n, expected):
    assert b_of_n(n) == pytest.approx(expected, abs=1e-9)


def test_b_of_n_rejects_zero():
    with pytest.raises(InvalidInputError):
        b_of_n(0)


@pytest.mark.parametrize("dip,n,p,dp", MPMATH_VALUES)
def test_function_matches_high_precision(dip, n, p, dp):
    assert pvalue_function(dip, n) == pytest.approx(p, rel=1e-13)
    assert sigmoid_dpdd(dip, b_of_n(n)) == pytest.approx(dp, rel=1e-12)


def test_function_limits_and_monotonicity():
    assert pvalue_function(1e-9, 500) == pytest.approx(1.0, abs=1e-6)
    assert pvalue_function(0.01, 500) > pvalue_function(0.10, 500)
    assert pvalue_function(0.25, 10**9) == 0.0


@given(st.floats(1e-6, 0.25), st.floats(1e-6, 0.25), st.integers(1, 10**6))
def test_function_decreasing_in_dip(d1, d2, n):
    lo, hi = sorted((d1, d2))
    p_lo, p_hi = pvalue_function(lo, n), pvalue_function(hi, n)
    assert 0.0 <= p_hi <= p_lo <= 1.0


@given(st.floats(1e-4, 0.25), st.integers(1, 10**5), st.integers(1, 10**5))
def test_function_non_increasing_in_n(d, n1, n2):
    lo, hi = sorted((n1, n2))
    assert pvalue_function(d, hi) <= pvalue_function(d, lo)


@given(st.floats(1e-4, 0.24), st.integers(2, 10**5))
def test_derivative_matches_finite_difference(d, n):
    b = b_of_n(n)
    h = 1e-7
    from dipkit.pvalue import sigmoid_pvalue

    fd = (sigmoid_pvalue(d + h, b) - sigmoid_pvalue(d - h, b)) / (2 * h)
    an = sigmoid_dpdd(d, b)
    assert an <= 0.0
    assert an == pytest.approx(fd, rel=1e-4, abs=1e-9)


@pytest.mark.parametrize("dip", [0.0, -0.1, 0.3, np.nan])
def test_function_rejects_bad_dip(dip):
    with pytest.raises(InvalidInputError):
        pvalue_function(dip, 10)


def test_degenerate_zero_dip_is_unimodal():
    assert pvalue_function(0.0, 1, degenerate=True) == 1.0
    assert pvalue_table(0.0, 1, _linear_table(), degenerate=True) == 1.0
    assert pvalue_bootstrap(0.0, 1, 10, degenerate=True) == 1.0


def test_shape_and_coefficient_validation():
    with pytest.raises(InvalidInputError):
        SigmoidShape(w=1.5)
    with pytest.raises(InvalidInputError):
        SigmoidShape(h=0.0)
    with pytest.raises(InvalidInputError):
        BCoefficients(b1=-1.0)


def _linear_table():
    # rows on a shared p grid, linear in dip
    return LookupTable(
        np.array([100, 400]),
        [np.array([0.05, 0.15]), np.array([0.1, 0.2])],
        [np.array([1.0, 0.0]), np.array([1.0, 0.0])],
        {},
    )


def test_table_grid_points_exact(small_table):
    for n, d, p in zip(small_table.sizes, small_table.dips, small_table.ps):
        for i in range(0, d.size, 7):
            assert pvalue_table(d[i], int(n), small_table) == p[i]


def test_table_clamps_outside_grid(small_table):
    d, _ = small_table.row(40)
    assert pvalue_table(d[0] * 0.5, 40, small_table) == 1.0
    assert pvalue_table(min(0.25, d[-1] * 1.01), 40, small_table) == 0.0


def test_table_midway_in_sqrt_n_averages():
    t = _linear_table()
    # sqrt(225) = 15 is midway between sqrt(100) and sqrt(400)
    p_lo = pvalue_table(0.125, 100, t)
    p_hi = pvalue_table(0.125, 400, t)
    assert (p_lo, p_hi) == pytest.approx((0.25, 0.75))
    assert pvalue_table(0.125, 225, t) == pytest.approx((p_lo + p_hi) / 2, abs=1e-12)


def test_table_out_of_range_and_small_n():
    t = _linear_table()
    with pytest.raises(OutOfRangeError):
        pvalue_table(0.2, 401, t)
    d_small, _ = interpolated_row(t, 3)
    np.testing.assert_array_equal(d_small, t.dips[0])


def test_interpolated_row_is_monotone(small_table):
    for n in (11, 25, 41, 100, 159):
        d, p = interpolated_row(small_table, n)
        assert np.all(np.diff(d) >= 0) and np.all(np.diff(p) <= 0)


def test_table_csv_round_trip(tmp_path, small_table):
    path = tmp_path / "t.csv"
    small_table.to_csv(path)
    text = path.read_text()
    assert text.startswith("n,dip,p\n") and "\r" not in text
    back = LookupTable.from_csv(path)
    assert back.metadata == small_table.metadata
    for a, b in zip(back.dips, small_table.dips):
        np.testing.assert_array_equal(a, b)
    assert back.to_csv_text() == text


def test_table_rejects_bad_rows():
    with pytest.raises(InvalidInputError):
        LookupTable([10], [np.array([0.2, 0.1])], [np.array([0.9, 0.1])], {})
    with pytest.raises(InvalidInputError):
        LookupTable([10, 5], [np.array([0.1])] * 2, [np.array([0.5])] * 2, {})


def test_table_reader_rejects_bad_header(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,c\n1,0.1,0.5\n")
    with pytest.raises(InvalidInputError):
        LookupTable.from_csv(p)


def test_env_var_selects_table(tmp_path, monkeypatch, small_table):
    path = tmp_path / "env.csv"
    small_table.to_csv(path)
    monkeypatch.setenv("DIPKIT_TABLE", str(path))
    assert load_table().max_n == 160


def test_bootstrap_conventions():
    null = bootstrap_dips(30, 500, 7)
    assert pvalue_bootstrap(min(0.25, null[-1] + 1e-9), 30, 500, 7) == 0.0
    assert pvalue_bootstrap(1e-9, 30, 500, 7) == 1.0
    # ties count as at least as large
    assert pvalue_bootstrap(null[-1], 30, 500, 7) == pytest.approx((null == null[-1]).sum() / 500)
    med = np.median(null)
    assert abs(pvalue_bootstrap(med, 30, 500, 7) - 0.5) <= 2 / np.sqrt(500)


def test_bootstrap_independent_of_worker_count():
    a = simulate_null_dips(25, 1000, 4, n_jobs=1)
    b = simulate_null_dips(25, 1000, 4, n_jobs=3)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, simulate_null_dips(25, 1000, 5))


def test_cached_and_uncached_agree():
    assert pvalue_bootstrap(0.07, 20, 300, 2, cache=True) == pvalue_bootstrap(0.07, 20, 300, 2, cache=False)


@given(st.floats(1e-4, 0.25), st.integers(4, 160), st.sampled_from(["function", "table", "bootstrap"]))
def test_all_methods_in_unit_interval(d, n, method):
    p = dip_pvalue(d, n, PValueConfig(method=method, table=_HYP_TABLE, repetitions=200))
    assert 0.0 <= p <= 1.0



def test_unknown_method_rejected():
    with pytest.raises(InvalidInputError):
        PValueConfig(method="exact")
