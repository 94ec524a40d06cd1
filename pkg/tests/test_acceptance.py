"""End-to-end acceptance checks, one test per criterion.

Each test records a PASS/FAIL line that is printed in the terminal summary.
"""
import subprocess
import sys
import time

import numpy as np
import pytest

from conftest import record_acceptance
from oracles import lp_dip
from reference_values import CONSISTENCY, ROUNDING
from test_gradient import _draws, fd_gradient

from dipkit import BCoefficients, SCENARIOS, SigmoidShape, compute_dip, dip_gradient, dipnsub, nmi, pvalue_gradient
from dipkit.calibration import bootstrap_table, fit_b, quantile_levels, table_mse
from dipkit.evalkit import bench_pvalue_methods, generate, make_synth
from dipkit.pvalue import _sorted_null_dips, load_table, pvalue_bootstrap, pvalue_function, pvalue_table
from dipkit.unidip import SignificanceConfig, tailored_dip, unidip

PUBLISHED_COEFFS = BCoefficients(17.30784, 12.04918)


@pytest.fixture(scope="module")
def fresh_table():
    sizes = np.unique(np.round(np.geomspace(50, 50_000, 20)).astype(np.int64))
    t0 = time.perf_counter()
    table = bootstrap_table(sizes, quantile_levels(50), repetitions=2000, rng_seed=20261017)
    return table, time.perf_counter() - t0


def test_criterion_1_sigmoid_fidelity(fresh_table):
    table, seconds = fresh_table
    t0 = time.perf_counter()
    mse = table_mse(table, PUBLISHED_COEFFS, SigmoidShape())
    seconds += time.perf_counter() - t0
    ok = mse <= 1e-4 and seconds <= 600
    record_acceptance(1, "sigmoid fidelity", ok, f"MSE {mse:.3e} (<= 1e-4), {seconds:.0f}s (<= 600s)")
    assert ok


def test_criterion_2_method_consistency():
    table = load_table()
    lines, ok = [], True
    for name, cells in CONSISTENCY.items():
        kind = "multimodal" if " u " in name else "unimodal"
        for n, (mean, sd) in cells.items():
            f, t, b = [], [], []
            for r in range(100):
                x, _ = generate(SCENARIOS[name], n, (r, n))
                res = compute_dip(np.sort(x))
                f.append(pvalue_function(res.dip, n))
                t.append(pvalue_table(res.dip, n, table))
                b.append(pvalue_bootstrap(res.dip, n, 1000, 0))
            mf, mt, mb = np.mean(f), np.mean(t), np.mean(b)
            inside = abs(mf - mean) <= sd + ROUNDING[kind]
            agree = max(abs(mf - mt), abs(mf - mb), abs(mt - mb)) <= 0.03
            ok &= inside and agree
            if not (inside and agree):
                lines.append(f"{name} n={n}: F={mf:.4f} T={mt:.4f} B={mb:.4f} vs {mean}+-{sd}")
    detail = "all 18 cells inside published spread, methods within 0.03" if ok else "; ".join(lines)
    record_acceptance(2, "method consistency", ok, detail)
    assert ok, detail


def test_criterion_3_fit_round_trip(fresh_table):
    from test_calibration import synthetic_table

    exact = fit_b(synthetic_table(PUBLISHED_COEFFS, SigmoidShape()))
    err = max(abs(exact.b1 - PUBLISHED_COEFFS.b1), abs(exact.b2 - PUBLISHED_COEFFS.b2))
    noisy = fit_b(fresh_table[0])
    ok = err <= 1e-6 and abs(noisy.b1 - PUBLISHED_COEFFS.b1) <= 0.5 and abs(noisy.b2 - PUBLISHED_COEFFS.b2) <= 1.5
    record_acceptance(
        3, "fit pipeline", ok, f"noiseless error {err:.1e}; regenerated b1={noisy.b1:.4f}, b2={noisy.b2:.4f}"
    )
    assert ok


def test_criterion_4_dip_correctness():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(10_000):
        n = int(rng.integers(2, 13))
        x = np.sort(rng.standard_normal(n))
        worst = max(worst, abs(lp_dip(x) - compute_dip(x).dip))
    bounds_ok = True
    for _ in range(10_000):
        n = int(np.exp(rng.uniform(np.log(2), np.log(10_000))))
        x = np.sort(rng.standard_normal(n) * rng.uniform(0.1, 10))
        d = compute_dip(x).dip
        bounds_ok &= 1 / (2 * n) - 1e-15 <= d <= 0.25
    affine = 0.0
    for _ in range(500):
        x = rng.standard_normal(int(rng.integers(5, 300)))
        a, c = rng.uniform(0.1, 100) * rng.choice([-1, 1]), rng.uniform(-100, 100)
        affine = max(affine, abs(compute_dip(a * x + c, sort=True).dip - compute_dip(x, sort=True).dip))
    ok = worst <= 1e-12 and bounds_ok and affine <= 1e-12
    record_acceptance(
        4, "dip correctness", ok, f"LP oracle max error {worst:.1e}, bounds {bounds_ok}, affine max error {affine:.1e}"
    )
    assert ok


def test_criterion_5_gradient_correctness():
    checked, worst = 0, 0.0
    for X, a in _draws(150, seed=5):
        fd = fd_gradient(X, a, lambda d: d)
        if fd is None:
            continue
        g = dip_gradient(X, a).dip_gradient
        worst = max(worst, np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12))
        checked += 1
    ortho, anti = 0.0, 0.0
    for X, a in _draws(100, seed=6):
        r = pvalue_gradient(X, a)
        gd, gp = r.dip_gradient, r.pvalue_gradient
        ortho = max(ortho, abs(gd @ a) / (np.linalg.norm(gd) * np.linalg.norm(a)))
        if np.linalg.norm(gp) > 0:
            anti = max(anti, abs(gd @ gp / (np.linalg.norm(gd) * np.linalg.norm(gp)) + 1.0))
    ok = checked >= 100 and worst < 1e-4 and ortho < 1e-10 and anti < 1e-10
    record_acceptance(
        5, "gradient correctness", ok,
        f"{checked} FD pairs, max rel error {worst:.1e}; orthogonality {ortho:.1e}; antiparallel {anti:.1e}",
    )
    assert ok


def _three_gaussians(seed, noise):
    rng = np.random.default_rng(seed)
    xs = [rng.normal(m, 1.0, 500) for m in (0.0, 8.0, 16.0)]
    labels = [np.full(500, i) for i in range(3)]
    if noise:
        xs.append(rng.uniform(-4.0, 20.0, noise))
        labels.append(np.full(noise, -1))
    x, lab = np.concatenate(xs), np.concatenate(labels)
    order = np.argsort(x, kind="stable")
    return x[order], lab[order]


def test_criterion_6_tailoring():
    cfg = SignificanceConfig()
    med = {}
    for noise in (0, 300):
        scores = []
        for seed in range(20):
            x, lab = _three_gaussians(seed, noise)
            scores.append((nmi(lab, unidip(x, cfg)), nmi(lab, tailored_dip(x, cfg))))
        med[noise] = np.median(scores, axis=0)
    ok = med[0][1] >= 0.9 and med[0][1] > med[0][0] and med[300][1] - med[300][0] >= 0.05
    record_acceptance(
        6, "TailoredDip vs UniDip", ok,
        f"no noise {med[0][0]:.3f} -> {med[0][1]:.3f}; noisy {med[300][0]:.3f} -> {med[300][1]:.3f}",
    )
    assert ok


def test_criterion_7_dipnsub_synth():
    t0 = time.perf_counter()
    runs = []
    for seed in range(10):
        X, lab = make_synth(seed)
        res = dipnsub(X)
        runs.append((nmi(lab, res.labels), res.labels.k, res.axes.shape[0], seed))
    seconds = time.perf_counter() - t0
    best = max(runs)
    ok = best[1] == 7 and best[2] == 2 and best[0] >= 0.9 and seconds <= 120
    hits = sum(r[1] == 7 and r[2] == 2 for r in runs)
    record_acceptance(
        7, "Dip'n'Sub on SYNTH", ok,
        f"best NMI {best[0]:.3f} with k={best[1]}, {best[2]} features; k=7 and 2 features in {hits}/10; {seconds:.0f}s",
    )
    assert ok


def test_criterion_8_runtime():
    table = load_table()
    scen = [(s, SCENARIOS[s]) for s in ("N(4,1)", "N(4,1) u N(0,1)")]
    rep = bench_pvalue_methods(scen, [500, 5000], 5, 1000, 0, table)
    per_call = {}
    for r in rep.rows:
        per_call.setdefault((r["method"], r["n"]), []).append(r["seconds"] / r["count"])
    ratios = {n: np.mean(per_call[("bootstrap", n)]) / np.mean(per_call[("function", n)]) for n in (500, 5000)}
    beyond = bench_pvalue_methods(scen[:1], [table.max_n + 1], 2, 1000, 0, table, ("function", "table"))
    unavailable = [r["available"] for r in beyond.rows if r["method"] == "table"] == [False]
    savings = []
    full, _ = _three_gaussians(0, 0)
    for size in (300, 1500):
        x = np.sort(np.random.default_rng(size).choice(full, size, replace=False))
        t0 = time.perf_counter()
        tailored_dip(x, SignificanceConfig())
        f = time.perf_counter() - t0
        _sorted_null_dips.cache_clear()
        t0 = time.perf_counter()
        tailored_dip(x, SignificanceConfig(method="bootstrap"))
        savings.append(1.0 - f / (time.perf_counter() - t0))
    ok = min(ratios.values()) >= 100 and unavailable and min(savings) >= 0.5
    record_acceptance(
        8, "runtime ordering", ok,
        f"bootstrap/function per call {ratios[500]:.0f}x at n=500, {ratios[5000]:.0f}x at n=5000; "
        f"table unavailable above {table.max_n}: {unavailable}; TailoredDip time saved {min(savings):.0%}-{max(savings):.0%}",
    )
    assert ok


def test_criterion_9_cli_determinism(tmp_path):
    def cli(*args):
        res = subprocess.run([sys.executable, "-m", "dipkit", *map(str, args)], capture_output=True, cwd=tmp_path)
        assert res.returncode == 0, res.stderr.decode()
        return res.stdout

    x_csv, synth_csv, data_csv, table_csv = (tmp_path / n for n in ("x.csv", "synth.csv", "X.csv", "t.csv"))
    x_csv.write_bytes(cli("gen", "--scenario", "N(4,1) u N(0,1)", "--n", 400, "--seed", 3))
    x_csv.write_text("\n".join(line.split(",")[0] for line in x_csv.read_text().splitlines()) + "\n")
    synth_csv.write_bytes(cli("gen", "--scenario", "synth", "--n", 40, "--seed", 1))
    X = np.loadtxt(synth_csv, delimiter=",", skiprows=1)[:, :8]
    np.savetxt(data_csv, X, delimiter=",")
    labels_json = tmp_path / "labels.json"
    labels_json.write_bytes(cli("tailoreddip", "--input", x_csv))
    cli("bootstrap-table", "--sizes", "10,40,160", "--reps", 200, "--levels", 31, "--output", table_csv)
    commands = [
        ("dip", "--input", x_csv),
        ("pvalue", "--input", x_csv, "--method", "bootstrap", "--reps", 300, "--seed", 5),
        ("pvalue", "--dip", 0.02, "--n", 1000, "--method", "table"),
        ("bootstrap-table", "--sizes", "10,40", "--reps", 100, "--levels", 31, "--seed", 2),
        ("fit", "--table", table_csv),
        ("unidip", "--input", x_csv),
        ("tailoreddip", "--input", x_csv, "--assign-noise"),
        ("dipnsub", "--input", data_csv, "--max-iters", 40, "--seed", 4),
        ("gen", "--scenario", "synth", "--n", 20, "--seed", 9),
        ("nmi", labels_json, labels_json),
        ("bench", "--scenarios", "N(4,1)", "--sizes", "20,50", "--per-cell", 2, "--reps", 20, "--table", table_csv,
         "--no-seconds"),
    ]
    differing = [c[0] for c in commands if cli(*c) != cli(*c)]
    ok = not differing
    record_acceptance(
        9, "CLI determinism", ok,
        f"{len(commands)} invocations over all 10 commands byte-identical" if ok else f"differ: {differing}",
    )
    assert ok
