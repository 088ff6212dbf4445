"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 runtime error, 3 gradient check failed.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from .config import load_fis, save_fis
from .data import IRIS_FEATURES, IRIS_LABEL, iris_path, load_table, range_normalize
from .errors import FuzzyGradError
from .fis import DEFAULT_GRID_POINTS, evalfis, sample_mf_curves
from .gradcheck import DEFAULT_STEP, DEFAULT_TOLERANCE, check_template
from .training import (
    IRIS_TEMPLATE,
    TrainConfig,
    build_iris_fis,
    classify,
    count_misclassified,
    read_history,
    train,
    write_history,
)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME, EXIT_GRADCHECK = 0, 1, 2, 3

log = logging.getLogger("fuzzygrad")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _nonneg_float(text: str) -> float:
    v = float(text)
    if not v >= 0.0:
        raise argparse.ArgumentTypeError(f"expected a non-negative number, got {text}")
    return v


def _positive_float(text: str) -> float:
    v = float(text)
    if not v > 0.0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fuzzygrad", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def data_opts(p, required=True):
        p.add_argument("--data", required=required,
                       help="CSV file with a header row; 'iris' selects the bundled copy")
        p.add_argument("--features", nargs=2, default=list(IRIS_FEATURES), metavar="COL")
        p.add_argument("--label", default=IRIS_LABEL)

    p = sub.add_parser("train", help="fit the input membership functions")
    data_opts(p)
    p.add_argument("--epochs", type=_positive_int, default=100)
    p.add_argument("--stepsize", type=_nonneg_float, default=0.3)
    p.add_argument("--grid", type=_positive_int, default=DEFAULT_GRID_POINTS)
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--svg", action="store_true", help="also render the learning curves")

    p = sub.add_parser("eval", help="predict with a saved or the initial system")
    data_opts(p)
    p.add_argument("--fis", type=Path, help="system definition (default: initial Iris model)")
    p.add_argument("--grid", type=_positive_int, default=DEFAULT_GRID_POINTS)
    p.add_argument("--out", type=Path, default=Path("."))

    p = sub.add_parser("plot-mf", help="sample input membership functions to CSV")
    p.add_argument("--fis", type=Path, help="system definition (default: initial Iris model)")
    p.add_argument("--grid", type=_positive_int, default=101, help="samples per curve")
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--svg", action="store_true")

    p = sub.add_parser("plot-learning", help="learning curves of theta1 and RMSE")
    p.add_argument("--history", type=Path, help="history CSV (default: OUT/history.csv)")
    p.add_argument("--out", type=Path, default=Path("."))
    p.add_argument("--svg", action="store_true")

    p = sub.add_parser("gradcheck", help="compare backward with finite differences")
    data_opts(p)
    p.add_argument("--grid", type=_positive_int, default=DEFAULT_GRID_POINTS)
    p.add_argument("--step", type=_positive_float, default=DEFAULT_STEP)
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)
    return parser


def _load_data(args):
    path = iris_path() if args.data == "iris" and not Path("iris").exists() else Path(args.data)
    ds = load_table(path, args.features, args.label)
    x, _ = range_normalize(ds.features, ds.feature_names)
    return ds, np.column_stack([x, ds.target])


def _initial_fis():
    return build_iris_fis(*IRIS_TEMPLATE.theta0)


def _fmt(v: float) -> str:
    return repr(float(v))


def run_train(args) -> int:
    ds, data = _load_data(args)
    config = TrainConfig(epochs=args.epochs, stepsize=args.stepsize, grid_points=args.grid)
    result = train(IRIS_TEMPLATE, data, config)
    args.out.mkdir(parents=True, exist_ok=True)
    write_history(result, args.out / "history.csv")
    save_fis(result.best_fis, args.out / "best_fis.json")

    x = data[:, :-1]
    init = count_misclassified(classify(evalfis(x, _initial_fis(), args.grid)), ds.target)
    best = count_misclassified(classify(evalfis(x, result.best_fis, args.grid)), ds.target)
    print(f"initial_rmse={result.initial_err:.6f} best_rmse={result.best_err:.6f} "
          f"misclassified_initial={init} misclassified_best={best}")
    if args.svg:
        _render_learning(args.out / "history.csv", args.out / "learning_curves.svg")
    return EXIT_OK


def run_eval(args) -> int:
    ds, data = _load_data(args)
    fis = load_fis(args.fis) if args.fis else _initial_fis()
    y = evalfis(data[:, :-1], fis, args.grid)
    labels = classify(y, len(ds.class_names))
    err = float(np.sqrt(np.mean((y.data - ds.target) ** 2)))
    missed = count_misclassified(labels, ds.target)
    args.out.mkdir(parents=True, exist_ok=True)
    with (args.out / "predictions.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "y", "class", "target"])
        for i, (yi, c, t) in enumerate(zip(y.data, labels, ds.target), start=1):
            w.writerow([i, _fmt(yi), int(c), int(t)])
    print(f"rmse={err:.6f} misclassified={missed}")
    return EXIT_OK


def run_plot_mf(args) -> int:
    fis = load_fis(args.fis) if args.fis else _initial_fis()
    args.out.mkdir(parents=True, exist_ok=True)
    written = []
    for i, var in enumerate(fis.inputs, start=1):
        rows = sample_mf_curves(fis, "input", i, args.grid)
        path = args.out / f"mf_input{i}_{var.name}.csv"
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["x", "label", "mu"])
            for x, label, mu in rows:
                w.writerow([_fmt(x), label, _fmt(mu)])
        written.append(path)
        if args.svg:
            _render_mf(rows, var.name, path.with_suffix(".svg"))
    for path in written:
        print(path)
    return EXIT_OK


def run_plot_learning(args) -> int:
    history = args.history or args.out / "history.csv"
    header, rows = read_history(history)
    keep = [j for j, h in enumerate(header) if h in ("epoch", "rmse")
            or (h.startswith("theta") and int(h[5:]) <= 8)]
    args.out.mkdir(parents=True, exist_ok=True)
    out = args.out / "learning_curves.csv"
    with out.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([header[j] for j in keep])
        for r in rows:
            w.writerow([int(r[0])] + [_fmt(r[j]) for j in keep[1:]])
    print(out)
    if args.svg:
        _render_learning(history, args.out / "learning_curves.svg")
    return EXIT_OK


def run_gradcheck(args) -> int:
    _, data = _load_data(args)
    hook = (lambda g: g * 1.01) if args.corrupt else None
    report = check_template(IRIS_TEMPLATE, data, args.grid, args.step, DEFAULT_TOLERANCE, hook)
    verdict = "PASS" if report.passed else "FAIL"
    print(f"max_rel_error={report.max_rel_error:.3e} step={report.step:g} "
          f"tolerance={report.tolerance:g} params={report.analytic.size} {verdict}")
    return EXIT_OK if report.passed else EXIT_GRADCHECK


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "fuzzygrad"
    import matplotlib.pyplot as plt
    return plt


def _render_mf(rows, title: str, path: Path) -> None:
    try:
        plt = _pyplot()
    except ImportError:
        log.warning("matplotlib not installed; skipping %s", path)
        return
    fig, ax = plt.subplots(figsize=(5, 3))
    labels = list(dict.fromkeys(r[1] for r in rows))
    for label in labels:
        pts = [(x, mu) for x, lab, mu in rows if lab == label]
        ax.plot(*zip(*pts), label=label)
    ax.set(title=title, xlabel=title, ylabel="membership", ylim=(-0.05, 1.05))
    ax.legend()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _render_learning(history: Path, path: Path) -> None:
    try:
        plt = _pyplot()
    except ImportError:
        log.warning("matplotlib not installed; skipping %s", path)
        return
    header, rows = read_history(history)
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3))
    for j, h in enumerate(header):
        if h.startswith("theta") and int(h[5:]) <= 8:
            ax1.plot(rows[:, 0], rows[:, j], label=h)
    ax1.set(title="theta1", xlabel="epoch")
    ax1.legend(fontsize="x-small", ncol=2)
    ax2.plot(rows[:, 0], rows[:, 1])
    ax2.set(title="RMSE", xlabel="epoch")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


COMMANDS = {
    "train": run_train,
    "eval": run_eval,
    "plot-mf": run_plot_mf,
    "plot-learning": run_plot_learning,
    "gradcheck": run_gradcheck,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (FuzzyGradError, OSError) as exc:
        print(f"fuzzygrad {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
