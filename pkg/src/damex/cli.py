"""Command-line front end: ``damex <command> ...``.

Exit codes: 0 success, 1 usage error, 2 data or I/O error.
"""

from __future__ import annotations

import argparse
import io as _io
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .cones import census, fit_damex, threshold_masses
from .core import AUTO, DamexModel, DamexParams, DataError, FeatureSubset
from .evaluation import (
    RankedScores,
    CombinedDetector,
    power_grid,
    pr_curve,
    repeated_evaluation,
    roc_curve,
    stability_scan,
    write_curve,
)
from .scoring import level_set_grid, score_details
from .simulation import (
    LogisticSpec,
    default_recovery_params,
    random_support,
    sample_asymmetric_logistic,
    support_recovery_experiment,
    two_d_benchmark,
)

logger = logging.getLogger("damex")

EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _mu_min(text: str):
    if text == AUTO:
        return AUTO
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number or 'auto', got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError("mu_min must be >= 0")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _add_damex_options(p, k_default_help="ceil(sqrt(n))"):
    g = p.add_argument_group("DAMEX parameters")
    g.add_argument("--k", type=int, help=f"extremes budget; radial threshold is n/k (default {k_default_help})")
    g.add_argument("--k-power", type=float, help="set k = ceil(n ** K_POWER) instead of --k")
    g.add_argument("--epsilon", type=float, default=0.01, help="directional tolerance in [0, 1) (default 0.01)")
    g.add_argument("--mu-min", type=_mu_min, default=AUTO,
                   help="mass threshold, a number or 'auto' = mean charged mass (default auto)")
    g.add_argument("--mu-min-frac", type=float,
                   help="threshold as a fraction of the total extreme mass (overrides --mu-min)")


def _params(args, n: int) -> DamexParams:
    if args.k is not None and args.k_power is not None:
        raise UsageError("--k and --k-power are mutually exclusive")
    k = args.k
    if args.k_power is not None:
        k = max(1, math.ceil(n ** args.k_power))
    mu = 0.0 if args.mu_min_frac is not None else args.mu_min
    try:
        return DamexParams(k, args.epsilon, mu).resolve(n)
    except ValueError as exc:
        raise DataError(str(exc)) from None


def _fit(train, args) -> DamexModel:
    params = _params(args, train.n)
    model = fit_damex(train, params)
    if args.mu_min_frac is not None:
        level = args.mu_min_frac * model.masses.total_mass
        model = DamexModel(
            model.marginals, threshold_masses(model.masses, level),
            DamexParams(params.k, params.epsilon, level), mu_min_value=level,
            raw_n_charged=model.raw_n_charged,
        )
    return model


def _emit(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with io.atomic_write(out) as fh:
            fh.write(text)


def _csv(header, rows) -> str:
    buf = _io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _cone_text(subset: FeatureSubset) -> str:
    return " ".join(str(i) for i in subset.one_based())


# -- commands ------------------------------------------------------------------


def cmd_fit(args) -> int:
    train = io.read_csv(args.train, label_col=args.label_col)
    model = _fit(train, args)
    io.save_model(model, args.out, train.feature_names)
    masses = model.masses
    total_raw = masses.n_extreme / model.k
    print(f"n={model.n} d={model.d} k={model.k} epsilon={model.epsilon:g} "
          f"mu_min={model.mu_min_value:.6g} extremes={masses.n_extreme}")
    print(f"charged cones: {len(masses)} (before thresholding: {model.raw_n_charged})")
    print(f"retained mass: {masses.total_mass:.6g} of {total_raw:.6g}")
    rows = [(dim, mass, mass / masses.total_mass if masses.total_mass else 0.0)
            for dim, mass in census(masses).items()]
    print("mass by cone dimension:")
    print(_csv(("dimension", "mass", "fraction"), rows), end="")
    print("cones:")
    cones = [(_cone_text(s), masses.counts[s], masses[s]) for s in
             sorted(masses, key=lambda s: -masses.counts[s])]
    print(_csv(("cone", "count", "mass"), cones), end="")
    if args.census_out:
        _emit(_csv(("dimension", "mass", "fraction"), rows), args.census_out)
    return 0


def cmd_score(args) -> int:
    model = io.load_model(args.model)
    data = io.read_csv(args.test, label_col=args.label_col)
    if data.d != model.d:
        raise DataError(f"wrong dimension: test data has {data.d} features, model has {model.d}")
    det = score_details(model, data)
    rows = []
    for i in range(data.n):
        cone = det.cone(i)
        rows.append((i, det.scores[i], det.extreme[i],
                     _cone_text(cone) if det.charged[i] else "none-charged", _cone_text(cone)))
    _emit(_csv(("row", "score", "is_extreme", "cone", "assigned_cone"), rows), args.out)
    return 0


def cmd_simulate(args) -> int:
    rng = np.random.default_rng(args.seed)
    if args.subsets:
        subsets = tuple(FeatureSubset.from_one_based(_int_list(s.replace(" ", ",")))
                        for s in args.subsets.split(";"))
    else:
        if args.K is None:
            raise UsageError("give either --K or --subsets")
        subsets = tuple(random_support(args.d, args.K, rng))
    spec = LogisticSpec(args.d, subsets, args.w)
    data = sample_asymmetric_logistic(spec, args.n, rng)
    io.write_dataset(args.out, data)
    if args.support_out:
        _emit("".join(_cone_text(s) + "\n" for s in subsets), args.support_out)
    print(f"wrote {args.n} rows, d={args.d}, planted support:")
    for s in subsets:
        print(f"  {s}")
    return 0


def cmd_recover(args) -> int:
    rows = []
    for n in args.n:
        default = default_recovery_params(n)
        k = args.k
        if args.k_power is not None:
            k = max(1, math.ceil(n ** args.k_power))
        params = DamexParams(
            k if k is not None else default.k,
            default.epsilon if args.epsilon is None else args.epsilon,
            default.mu_min if args.mu_min is None else args.mu_min,
        )
        rows += support_recovery_experiment(args.d, args.K, [n], args.runs, params, args.w, args.seed)
    text = _csv(("K", "n", "runs", "mean_errors", "std_errors"),
                [(r.K, r.n, r.runs, r.mean_errors, r.std_errors) for r in rows])
    _emit(text, args.out)
    return 0


def cmd_evaluate(args) -> int:
    data = io.read_csv(args.data, label_col=args.label_col)
    if data.labels is None:
        raise DataError("evaluate needs a label column")
    n_train = int(round(args.train_fraction * int((data.labels == 0).sum())))
    params = _params(args, max(n_train, 2))
    if args.mu_min_frac is not None:
        raise UsageError("--mu-min-frac is not supported by evaluate")
    summary = repeated_evaluation(data, args.splits, args.train_fraction, params, args.trees, args.seed)
    _emit(_csv(("metric", "mean", "std"), summary.table()), args.out)
    if args.curves_dir:
        _write_curves(data, params, args)
    return 0


def _write_curves(data, params, args) -> None:
    """ROC and PR curves of a single split, for plotting."""
    rng = np.random.default_rng(args.seed)
    perm = rng.permutation(data.n)
    cut = int(round(args.train_fraction * data.n))
    train, test = data.subset(perm[:cut]), data.subset(perm[cut:])
    train = train.subset(train.labels == 0)
    det = CombinedDetector.fit(train, params, args.trees, None, rng)
    out = Path(args.curves_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, keys in (("iforest", det.baseline.score(test)), ("combined", det.keys(test))):
        scores = RankedScores(keys, test.labels)
        write_curve(out / f"roc_{name}.csv", *roc_curve(scores), names=("fpr", "tpr"))
        write_curve(out / f"pr_{name}.csv", *pr_curve(scores), names=("recall", "precision"))


def cmd_stability(args) -> int:
    train = io.read_csv(args.train, label_col=args.label_col)
    k_grid = args.k_grid or power_grid(train.n, num=args.k_points)
    eps_grid = args.epsilon_grid or [1e-4, 1e-3, 1e-2, 0.05, 0.1]
    try:
        report = stability_scan(train, k_grid, eps_grid, args.mu_min, args.level)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    text = _csv(("k", "epsilon", "n_charged", "jaccard_prev_k", "jaccard_prev_epsilon"), report.rows())
    _emit(text, args.out)
    if report.recommended:
        k, eps = report.recommended
        print(f"recommended: k={k} epsilon={eps:g}", file=sys.stderr)
    else:
        print("no stable region at level %g" % args.level, file=sys.stderr)
    return 0


def cmd_prepare(args) -> int:
    manifest = io.prepare_dataset(args.name, args.raw, args.out_dir, args.seed, args.test_fraction)
    print(json.dumps(manifest, indent=2))
    return 0


def cmd_levelsets(args) -> int:
    train, _ = two_d_benchmark(n_train=args.n, rng=args.seed)
    model = _fit(train, args)
    hi = np.quantile(train.values, args.quantile, axis=0)
    xs = np.linspace(0.0, hi[0], args.grid)
    ys = np.linspace(0.0, hi[1], args.grid)
    grid = level_set_grid(model, xs, ys)
    rows = ((x, y, grid[i, j]) for i, y in enumerate(ys) for j, x in enumerate(xs))
    _emit(_csv(("x", "y", "score"), rows), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="damex", description="Anomaly ranking with sparse multivariate extremes.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit a model on a CSV file and print the cone census")
    p.add_argument("train")
    p.add_argument("--out", required=True, help="model file to write (JSON)")
    p.add_argument("--label-col", help="column to exclude from the features")
    p.add_argument("--census-out", help="also write the mass-by-dimension census as CSV")
    _add_damex_options(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("score", help="score rows of a CSV file with a fitted model")
    p.add_argument("model")
    p.add_argument("test")
    p.add_argument("--out", help="output CSV (default stdout)")
    p.add_argument("--label-col", help="column to exclude from the features")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("simulate", help="sample an asymmetric logistic dataset")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--K", type=int, help="number of random planted subsets")
    p.add_argument("--subsets", help="explicit 1-based subsets, e.g. '1,2;3;2,3,4'")
    p.add_argument("--w", type=float, default=0.1, help="dependence parameter in (0, 1]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--support-out", help="write the planted subsets, one per line")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("recover", help="support-recovery experiment on simulated data")
    p.add_argument("--d", type=int, default=10)
    p.add_argument("--K", type=_int_list, required=True, help="comma-separated numbers of subsets")
    p.add_argument("--n", type=_int_list, required=True, help="comma-separated sample sizes")
    p.add_argument("--runs", type=int, default=20)
    p.add_argument("--w", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    g = p.add_argument_group("DAMEX parameters (default k=ceil(sqrt(n)), epsilon=0.05, mu_min=auto)")
    g.add_argument("--k", type=int)
    g.add_argument("--k-power", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--mu-min", type=_mu_min)
    p.set_defaults(func=cmd_recover)

    p = sub.add_parser("evaluate", help="iForest vs iForest + DAMEX over random splits")
    p.add_argument("data")
    p.add_argument("--label-col", default="label")
    p.add_argument("--splits", type=int, default=20)
    p.add_argument("--train-fraction", type=float, default=0.5)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--curves-dir", help="write ROC/PR curve points of one split here")
    _add_damex_options(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stability", help="scan (k, epsilon) for a stable charged-cone set")
    p.add_argument("train")
    p.add_argument("--label-col")
    p.add_argument("--k-grid", type=_int_list, help="comma-separated k values (default over [n^1/4, n^2/3])")
    p.add_argument("--k-points", type=int, default=8)
    p.add_argument("--epsilon-grid", type=_float_list)
    p.add_argument("--mu-min", type=_mu_min, default=AUTO)
    p.add_argument("--level", type=float, default=0.9)
    p.add_argument("--out")
    p.set_defaults(func=cmd_stability)

    p = sub.add_parser("prepare", help="build a benchmark dataset from local raw files")
    p.add_argument("name", choices=sorted(io.RECIPES))
    p.add_argument("raw", nargs="+")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--test-fraction", type=float)
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("levelsets", help="score grid of a model fitted on the 2-D toy problem")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--quantile", type=float, default=0.99, help="grid extends to this marginal quantile")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    _add_damex_options(p)
    p.set_defaults(func=cmd_levelsets, epsilon=0.1)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"damex: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ValueError, OSError) as exc:
        print(f"damex: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
