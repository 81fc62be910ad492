import argparse
import asyncio
import sys
from pathlib import Path

import numpy as np
import pandas as pd

from stabletree.datasets import (
    Dataset,
    encode_like,
    get_dataset,
    list_datasets,
    load_csv,
    preprocess,
)
from stabletree.errors import DataError, InputValidationError, StabletreeError
from stabletree.evaluation import (
    ExperimentConfig,
    ParetoReport,
    pareto_front,
    protocols_map,
    write_manifest,
)
from stabletree.grower import GrowConfig, fit, update
from stabletree.stable_loss import StableLossConfig, instability, mean_squared_error
from stabletree.tree import TreeModel
from stabletree.utils import BASELINE, DEFAULT_EPSILON, SELECTED_CONFIGS, data_dir, default_grid


def add_grow_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--max-depth", type=int, default=None, help="Maximum tree depth (default unlimited).")
    parser.add_argument("--min-leaf", type=int, default=2, help="Minimum rows per leaf (default 2).")
    parser.add_argument("--no-adaptive", action="store_true", help="Disable adaptive stopping.")
    parser.add_argument("--cir-paths", type=int, default=1000, help="Monte-Carlo paths for the split adjustment.")
    parser.add_argument("--cir-grid", type=int, default=100, help="Time grid points for the split adjustment.")
    parser.add_argument("--seed", type=int, default=0, help="Master random seed.")
    parser.add_argument("--epsilon", type=float, default=DEFAULT_EPSILON, help="Stabilizer in the phi denominator.")


def add_experiment_flags(parser: argparse.ArgumentParser):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--dataset", help="Registered dataset name (see `datasets`).")
    source.add_argument("--data", type=Path, help="CSV file to use instead of a registered dataset.")
    parser.add_argument("--target", help="Response column when --data is given.")
    parser.add_argument("--data-dir", type=Path, default=None, help="Dataset root (overrides STABLETREE_DATA_DIR).")
    parser.add_argument("--out-dir", type=Path, default=Path("."), help="Directory for report CSV and manifest.")
    parser.add_argument("--full", action="store_true", help="Use full repeat counts instead of desk scale.")
    parser.add_argument("--jobs", type=int, default=1, help="Worker processes.")
    parser.add_argument("--subsample", type=int, default=None, help="Seeded row subsample before running.")
    add_grow_flags(parser)


def grow_config(args: argparse.Namespace) -> GrowConfig:
    return GrowConfig(
        adaptive_stopping=not args.no_adaptive,
        max_depth=args.max_depth,
        min_samples_leaf=args.min_leaf,
        cir_paths=args.cir_paths,
        cir_grid=args.cir_grid,
        seed=args.seed,
        verbose=args.verbose,
    )


def read_dataset(path: Path, target: str) -> Dataset:
    return preprocess(load_csv(path, target), target)


def read_features(path: Path, target: str | None, model: TreeModel) -> Dataset:
    """Rows to predict, encoded onto the model's columns; the response is optional."""
    raw = load_csv(path, target)
    if raw.frame.isna().any().any():
        raise InputValidationError("Feature values must not be missing")
    return encode_like(raw, model.feature_names, target)


def cmd_fit(args: argparse.Namespace):
    data = read_dataset(args.data, args.target)
    model = fit(data, grow_config(args), args.epsilon)
    model.save(args.out)
    loss = mean_squared_error(data.y, model.predict(data.X))
    print(f"leaves: {model.n_leaves}")
    print(f"training loss: {loss:.6g}")


def cmd_update(args: argparse.Namespace):
    f0 = TreeModel.load(args.model)
    data = encode_like(load_csv(args.data, args.target), f0.feature_names, args.target)
    loss_cfg = StableLossConfig(alpha=args.alpha, beta=args.beta, epsilon=args.epsilon)
    f1 = update(f0, data, grow_config(args), loss_cfg)
    f1.save(args.out)
    pred1 = f1.predict(data.X)
    print(f"leaves: {f1.n_leaves}")
    print(f"loss: {mean_squared_error(data.y, pred1):.6g}")
    print(f"instability: {instability(f0.predict(data.X), pred1):.6g}")


def cmd_predict(args: argparse.Namespace):
    model = TreeModel.load(args.model)
    data = read_features(args.data, args.target, model)
    frame = pd.DataFrame(
        {"leaf_id": model.map_to_leaf(data.X), "prediction": model.predict(data.X)}
    )
    if args.out is None:
        frame.to_csv(sys.stdout, index=False, float_format="%.17g", lineterminator="\n")
    else:
        frame.to_csv(args.out, index=False, float_format="%.17g", lineterminator="\n")


def experiment_data(args: argparse.Namespace) -> Dataset:
    if args.data is not None:
        if not args.target:
            raise DataError("--target is required with --data")
        data = read_dataset(args.data, args.target)
    else:
        data = get_dataset(args.dataset, args.data_dir or data_dir())
    if args.subsample is not None:
        if not 1 <= args.subsample <= len(data):
            raise InputValidationError(f"--subsample must be in [1, {len(data)}]")
        rows = np.random.default_rng(args.seed).choice(len(data), args.subsample, replace=False)
        data = data.subset(np.sort(rows))
    return data


def print_frontier(report: ParetoReport):
    for row in report.pareto_rows():
        group = f" n={row.n}" if row.n is not None else ""
        group += f" iteration={row.iteration}" if row.iteration is not None else ""
        print(
            f"pareto: alpha={row.alpha:g} beta={row.beta:g}{group} "
            f"loss_rel={row.loss_rel:.4f} instability_rel={row.instability_rel:.4f}"
        )


def run_experiment(args: argparse.Namespace, setup: str, grid: list[tuple[float, float]], stem: str):
    data = experiment_data(args)
    options = dict(
        setup=setup, dataset=data.name, grid=grid, seed=args.seed, epsilon=args.epsilon, grow=grow_config(args)
    )
    cfg = ExperimentConfig(**options) if args.full else ExperimentConfig.desk(**options)
    report = asyncio.run(protocols_map[setup](data, cfg, jobs=args.jobs, verbose=args.verbose))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = args.out_dir / f"{data.name}_{stem}.csv"
    report.to_csv(csv_path)
    write_manifest(args.out_dir / f"{data.name}_{stem}.json", cfg, report)
    print(f"wrote {csv_path} ({len(report)} rows)")
    print_frontier(report)


def cmd_grid(args: argparse.Namespace):
    run_experiment(args, "main", default_grid(), "grid")


def cmd_bench_main(args: argparse.Namespace):
    run_experiment(args, "main", [BASELINE, *SELECTED_CONFIGS], "main")


def cmd_bench_n(args: argparse.Namespace):
    run_experiment(args, "varied_n", [BASELINE, *SELECTED_CONFIGS], "varied_n")


def cmd_bench_iter(args: argparse.Namespace):
    run_experiment(args, "iterative", [BASELINE, *SELECTED_CONFIGS], "iterative")


def cmd_pareto(args: argparse.Namespace):
    try:
        frame = pd.read_csv(args.data)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as e:
        raise DataError(f"Cannot parse {args.data}: {e}")
    missing = [column for column in ("loss", "instability") if column not in frame.columns]
    if missing:
        raise DataError(f"{args.data} lacks columns {missing}", line=1)
    frame["pareto"] = pareto_front(list(zip(frame["loss"], frame["instability"])))
    if args.out is not None:
        frame.to_csv(args.out, index=False, float_format="%.17g", lineterminator="\n")
    print(f"pareto: {int(frame['pareto'].sum())} of {len(frame)} rows")


def cmd_datasets(args: argparse.Namespace):
    root = args.data_dir or data_dir()
    for entry in list_datasets():
        status = "available" if (Path(root) / entry.file).exists() else "missing"
        n, m = entry.expected_shape
        print(f"{entry.name}: target={entry.target} {n} x {m} ({status})")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stabletree", description="Regression trees with stability-regularized updates."
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="Increase output (repeatable).")
    commands = parser.add_subparsers(dest="command", required=True)

    fit_parser = commands.add_parser("fit", help="Fit a tree on a CSV file.")
    fit_parser.add_argument("--data", type=Path, required=True, help="Training CSV.")
    fit_parser.add_argument("--target", required=True, help="Response column.")
    fit_parser.add_argument("--out", type=Path, required=True, help="Model file to write.")
    add_grow_flags(fit_parser)
    fit_parser.set_defaults(func=cmd_fit)

    update_parser = commands.add_parser("update", help="Update a tree on new data under the stable loss.")
    update_parser.add_argument("--model", type=Path, required=True, help="Prior model file.")
    update_parser.add_argument("--data", type=Path, required=True, help="Combined training CSV.")
    update_parser.add_argument("--target", required=True, help="Response column.")
    update_parser.add_argument("--out", type=Path, required=True, help="Updated model file to write.")
    update_parser.add_argument("--alpha", type=float, default=0.0, help="Constant regularization strength.")
    update_parser.add_argument("--beta", type=float, default=0.0, help="Uncertainty-weighted strength.")
    add_grow_flags(update_parser)
    update_parser.set_defaults(func=cmd_update)

    predict_parser = commands.add_parser("predict", help="Predict with a saved tree.")
    predict_parser.add_argument("--model", type=Path, required=True, help="Model file.")
    predict_parser.add_argument("--data", type=Path, required=True, help="CSV of inputs.")
    predict_parser.add_argument("--target", default=None, help="Response column to ignore, if present.")
    predict_parser.add_argument("--out", type=Path, default=None, help="Output CSV (default stdout).")
    predict_parser.set_defaults(func=cmd_predict)

    for name, func, summary in [
        ("grid", cmd_grid, "Main setup over the full 121-point grid."),
        ("bench-main", cmd_bench_main, "Main setup, baseline plus selected configurations."),
        ("bench-n", cmd_bench_n, "Varied sample size setup."),
        ("bench-iter", cmd_bench_iter, "Iterative updates setup."),
    ]:
        bench_parser = commands.add_parser(name, help=summary)
        add_experiment_flags(bench_parser)
        bench_parser.set_defaults(func=func)

    pareto_parser = commands.add_parser("pareto", help="Flag Pareto-efficient rows of a CSV.")
    pareto_parser.add_argument("--data", type=Path, required=True, help="CSV with loss and instability columns.")
    pareto_parser.add_argument("--out", type=Path, default=None, help="CSV to write with a pareto column.")
    pareto_parser.set_defaults(func=cmd_pareto)

    datasets_parser = commands.add_parser("datasets", help="List registered datasets.")
    datasets_parser.add_argument("--data-dir", type=Path, default=None, help="Dataset root.")
    datasets_parser.set_defaults(func=cmd_datasets)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except StabletreeError as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    return 0
