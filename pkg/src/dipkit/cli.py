"""Command-line interface: ``dipkit <command> [options]``.

Exit codes are 0 on success, 1 on invalid input and 2 when a computation
fails (fit failure, sample size beyond the table, missing gradient).
"""
import argparse
import csv
import json
import sys

import numpy as np

from . import __version__
from ._validation import DipkitError, InvalidInputError
from .calibration import DEFAULT_REPETITIONS, bootstrap_table, default_table_sizes, quantile_levels, refit
from .dip import compute_dip
from .dipnsub import SgdConfig, dipnsub
from .evalkit import SCENARIOS, bench_pvalue_methods, generate, make_synth, nmi
from .pvalue import METHODS, PValueConfig, _atomic_write_text, dip_pvalue, load_table
from .unidip import SignificanceConfig, assign_noise, tailored_dip, unidip

EXIT_OK, EXIT_INVALID, EXIT_COMPUTE = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidInputError(message)


def _float_or_none(text):
    try:
        return float(text)
    except ValueError:
        return None


def read_matrix(path):
    """Numeric CSV as a 2-D float array; a non-numeric first row is a header."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    if rows and any(_float_or_none(c) is None for c in rows[0]):
        rows = rows[1:]
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    width = len(rows[0])
    values = []
    for i, row in enumerate(rows):
        parsed = [_float_or_none(c) for c in row]
        if len(row) != width or any(v is None for v in parsed):
            raise InvalidInputError(f"{path}: row {i + 1} is not a numeric row of width {width}")
        values.append(parsed)
    return np.asarray(values, dtype=np.float64)


def read_labels(path):
    """Integer labels from a one-column CSV or a JSON document with ``labels``."""
    if str(path).endswith(".json"):
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, ValueError) as exc:
            raise InvalidInputError(f"cannot read {path}: {exc}") from exc
        if not isinstance(doc, dict) or "labels" not in doc:
            raise InvalidInputError(f"{path}: JSON has no 'labels' field")
        labels = np.asarray(doc["labels"])
    else:
        m = read_matrix(path)
        if m.shape[1] != 1:
            raise InvalidInputError(f"{path}: expected one column of labels")
        labels = m[:, 0]
    if labels.ndim != 1 or not np.all(np.equal(np.mod(labels, 1), 0)):
        raise InvalidInputError(f"{path}: labels must be integers")
    return labels.astype(np.int64)


def _column(path):
    m = read_matrix(path)
    if m.shape[1] != 1:
        raise InvalidInputError(f"{path}: expected a single column, got {m.shape[1]}")
    return m[:, 0]


def _emit(args, text):
    if args.output:
        _atomic_write_text(args.output, text)
    else:
        sys.stdout.write(text)


def _emit_json(args, doc):
    _emit(args, json.dumps(doc, indent=2) + "\n")


def _significance(args):
    return SignificanceConfig(args.alpha, args.method, args.table, args.reps, args.seed)


def _cmd_dip(args):
    x = np.sort(_column(args.input), kind="stable")
    res = compute_dip(x)
    _emit_json(
        args,
        {
            "dip": res.dip,
            "n": res.n,
            "modal_interval": [float(x[i]) for i in res.modal_interval],
            "modal_triangle": None if res.modal_triangle is None else [int(i) for i in res.modal_triangle],
            "side": res.side,
        },
    )


def _cmd_pvalue(args):
    if args.input:
        res = compute_dip(_column(args.input), sort=True)
        dip, n, degenerate = res.dip, res.n, res.degenerate
    else:
        if args.dip is None or args.n is None:
            raise InvalidInputError("pvalue needs --input or both --dip and --n")
        dip, n, degenerate = args.dip, args.n, False
    cfg = PValueConfig(method=args.method, table=args.table, repetitions=args.reps, seed=args.seed)
    p = dip_pvalue(dip, n, cfg, degenerate=degenerate)
    _emit_json(args, {"dip": float(dip), "n": int(n), "method": args.method, "p": float(p)})


def _cmd_bootstrap_table(args):
    sizes = default_table_sizes() if args.sizes is None else np.array(args.sizes, dtype=np.int64)
    table = bootstrap_table(sizes, quantile_levels(args.levels), args.reps, args.seed)
    if args.output:
        table.to_csv(args.output)
    else:
        sys.stdout.write(table.to_csv_text())


def _cmd_fit(args):
    table = load_table(args.table)
    report = refit(table, holdout_repetitions=args.holdout_reps, rng_seed=args.seed)
    _emit(args, report.to_json())


def _cluster_1d(args, algorithm):
    x = _column(args.input)
    order = np.argsort(x, kind="stable")
    xs = x[order]
    res = algorithm(xs, _significance(args))
    if getattr(args, "assign_noise", False):
        res = assign_noise(xs, res)
    labels = np.empty_like(res.labels)
    labels[order] = res.labels
    _emit_json(args, {"labels": [int(v) for v in labels], "k": int(res.k)})


def _cmd_dipnsub(args):
    X = read_matrix(args.input)
    sgd = SgdConfig(step_size=args.step_size, momentum=args.momentum, max_iters=args.max_iters)
    res = dipnsub(X, _significance(args), args.threshold, sgd, outliers=args.outliers)
    doc = {
        "labels": [int(v) for v in res.labels.labels],
        "k": int(res.labels.k),
        "axes": res.axes.tolist(),
    }
    if not args.no_projected:
        doc["projected"] = res.projected_data.tolist()
    _emit_json(args, doc)


def _cmd_gen(args):
    if args.scenario == "synth":
        X, labels = make_synth(rng_seed=args.seed, n_per_cluster=args.n)
        header = ",".join([f"x{i}" for i in range(X.shape[1])] + ["label"])
        lines = [header] + [",".join(f"{v:.17g}" for v in row) + f",{lab}" for row, lab in zip(X, labels)]
    else:
        if args.scenario not in SCENARIOS:
            raise InvalidInputError(f"unknown scenario {args.scenario!r}; choose 'synth' or one of {sorted(SCENARIOS)}")
        x, labels = generate(SCENARIOS[args.scenario], args.n, args.seed)
        lines = ["value,label"] + [f"{v:.17g},{lab}" for v, lab in zip(x, labels)]
    _emit(args, "\n".join(lines) + "\n")


def _cmd_nmi(args):
    _emit_json(args, {"nmi": nmi(read_labels(args.labels_a), read_labels(args.labels_b))})


def _cmd_bench(args):
    names = args.scenarios or list(SCENARIOS)
    unknown = [s for s in names if s not in SCENARIOS]
    if unknown:
        raise InvalidInputError(f"unknown scenarios: {unknown}")
    table = load_table(args.table) if "table" in args.methods else None
    report = bench_pvalue_methods(
        [(s, SCENARIOS[s]) for s in names],
        args.sizes,
        args.per_cell,
        args.reps,
        args.seed,
        table,
        tuple(args.methods),
    )
    _emit(args, report.to_csv(with_seconds=not args.no_seconds))
    sys.stderr.write(report.summary() + "\n")


def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _int_list(text):
    try:
        return [_positive_int(t) for t in text.split(",") if t.strip()]
    except (ValueError, argparse.ArgumentTypeError) as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated positive integers: {exc}")


def build_parser():
    parser = _Parser(prog="dipkit", description="Dip-test statistics, p-values and Dip-based clustering.")
    parser.add_argument("--version", action="version", version=f"dipkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, inp=True, out=True):
        if inp:
            p.add_argument("--input", required=True, help="input CSV")
        if out:
            p.add_argument("--output", help="output file (default: stdout)")
        p.add_argument("--seed", type=int, default=0)

    def pvalue_flags(p):
        p.add_argument("--method", choices=METHODS, default="function")
        p.add_argument("--reps", type=_positive_int, default=1000, help="bootstrap repetitions")
        p.add_argument("--table", help="look-up table CSV (default: $DIPKIT_TABLE or the shipped table)")

    p = sub.add_parser("dip", help="Dip statistic of a one-column CSV")
    common(p)
    p.set_defaults(func=_cmd_dip)

    p = sub.add_parser("pvalue", help="Dip p-value of a sample or of a given dip and n")
    common(p, inp=False)
    p.add_argument("--input", help="one-column CSV; overrides --dip and --n")
    p.add_argument("--dip", type=float)
    p.add_argument("--n", type=_positive_int)
    pvalue_flags(p)
    p.set_defaults(func=_cmd_pvalue)

    p = sub.add_parser("bootstrap-table", help="bootstrap a (dip, p) look-up table")
    common(p, inp=False)
    p.add_argument("--sizes", type=_int_list, help="comma-separated sample sizes (default: 63 sizes up to 150000)")
    p.add_argument("--reps", type=_positive_int, default=DEFAULT_REPETITIONS)
    p.add_argument("--levels", type=_positive_int, default=307, help="quantile levels per size")
    p.set_defaults(func=_cmd_bootstrap_table)

    p = sub.add_parser("fit", help="refit the sigmoid to a look-up table, write a JSON report")
    common(p, inp=False)
    p.add_argument("--table", help="table CSV (default: $DIPKIT_TABLE or the shipped table)")
    p.add_argument("--holdout-reps", type=int, default=0, help="repetitions of midpoint holdout rows; 0 skips")
    p.set_defaults(func=_cmd_fit)

    for name, func in (("unidip", unidip), ("tailoreddip", tailored_dip)):
        p = sub.add_parser(name, help=f"{name} clustering of a one-column CSV")
        common(p)
        p.add_argument("--alpha", type=float, default=0.01)
        pvalue_flags(p)
        if name == "tailoreddip":
            p.add_argument("--assign-noise", action="store_true", help="assign noise to the nearest cluster")
        p.set_defaults(func=lambda a, f=func: _cluster_1d(a, f))

    p = sub.add_parser("dipnsub", help="common-subspace clustering of a numeric CSV matrix")
    common(p)
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--threshold", type=float, default=0.15)
    p.add_argument("--step-size", type=float, default=0.1)
    p.add_argument("--momentum", type=float, default=0.95)
    p.add_argument("--max-iters", type=_positive_int, default=200)
    p.add_argument("--outliers", action="store_true", help="keep noise labels (-1)")
    p.add_argument("--no-projected", action="store_true", help="omit the projected data")
    pvalue_flags(p)
    p.set_defaults(func=_cmd_dipnsub)

    p = sub.add_parser("gen", help="sample a synthetic scenario as CSV")
    common(p, inp=False)
    p.add_argument("--scenario", default="N(4,1)", help="scenario name or 'synth'")
    p.add_argument("--n", type=_positive_int, default=1000, help="points (per cluster for 'synth')")
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("nmi", help="NMI of two label files (CSV column or clustering JSON)")
    p.add_argument("labels_a")
    p.add_argument("labels_b")
    p.add_argument("--output")
    p.set_defaults(func=_cmd_nmi)

    p = sub.add_parser("bench", help="time the p-value back-ends")
    common(p, inp=False)
    p.add_argument("--scenarios", nargs="*", help="scenario names (default: all)")
    p.add_argument("--sizes", type=_int_list, default=[50, 500, 5000])
    p.add_argument("--per-cell", type=_positive_int, default=100, help="p-values per scenario and size")
    p.add_argument("--reps", type=_positive_int, default=1000, help="bootstrap repetitions")
    p.add_argument("--methods", nargs="+", choices=METHODS, default=list(METHODS))
    p.add_argument("--table")
    p.add_argument("--no-seconds", action="store_true", help="write 'timed' instead of seconds")
    p.set_defaults(func=_cmd_bench)
    return parser


def main(argv=None):
    """Run the CLI and return its exit code."""
    try:
        args = build_parser().parse_args(argv)
        args.func(args)
    except InvalidInputError as exc:
        sys.stderr.write(f"dipkit: error: {exc}\n")
        return EXIT_INVALID
    except DipkitError as exc:
        sys.stderr.write(f"dipkit: {type(exc).__name__}: {exc}\n")
        return EXIT_COMPUTE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
