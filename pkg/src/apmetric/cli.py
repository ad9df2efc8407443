"""Command-line interface: train, eval, solve, and check subcommands.

Exit codes: 0 on success, 1 for usage errors (bad flags or flag values),
2 for data problems (unreadable files, malformed CSV cells, metric
definitions that fail to parse or compile), and 3 for solver failures.
All randomness flows from --seed, so two runs with identical flags
produce identical outputs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .data import (
    DataError,
    Dataset,
    apply_standardization,
    fit_standardization,
    load_csv,
    split,
)
from .dsl import MetricExpr, MetricSyntaxError, MetricValueError, evaluate_discrete
from .grids import compile_metric
from .library import load_metric
from .loss import LossConfig, ap_objective
from .models import (
    load_model,
    parse_architecture,
    predict,
    save_model,
)
from .simplex import SolverError
from .train import TrainConfig, train


class UsageError(Exception):
    """Bad command line; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # noqa: D102 - argparse hook
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="apmetric", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", metavar="command")

    p_train = sub.add_parser("train", help="fit a model on a CSV dataset")
    p_train.add_argument("--data", required=True, help="training CSV")
    group = p_train.add_mutually_exclusive_group()
    group.add_argument("--val", help="validation CSV (defaults to splitting --data)")
    group.add_argument(
        "--split-seed",
        type=int,
        default=None,
        help="seed for the internal train/val/test split (defaults to --seed)",
    )
    p_train.add_argument("--metric", required=True, help="metric file or bundled name")
    p_train.add_argument(
        "--model", default="linear", help="architecture: linear or mlp:H1[,H2...]"
    )
    p_train.add_argument("--epochs", type=int, default=100)
    p_train.add_argument("--lr", type=float, default=1e-3)
    p_train.add_argument("--l2", type=float, default=0.0)
    p_train.add_argument("--batch", type=int, default=25)
    p_train.add_argument("--optimizer", choices=("adam", "sgd"), default="adam")
    p_train.add_argument(
        "--solver", choices=("auto", "admm", "lp"), default="auto",
        help="inner-game solver for the adversarial objective",
    )
    p_train.add_argument(
        "--objective", choices=("ap", "bce"), default="ap",
        help="adversarial metric loss or cross-entropy baseline",
    )
    p_train.add_argument("--out", default="model.json", help="model output path")
    p_train.add_argument(
        "--history", default=None,
        help="per-epoch CSV path (default: <out>.history.csv)",
    )
    p_train.add_argument("--seed", type=int, default=0)

    p_eval = sub.add_parser("eval", help="evaluate a saved model on a CSV dataset")
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--model", required=True, help="model JSON path")
    p_eval.add_argument(
        "--metrics", required=True,
        help="comma-separated metric files or bundled names",
    )

    p_solve = sub.add_parser(
        "solve", help="solve one inner game for given potentials and labels"
    )
    p_solve.add_argument("--potentials", required=True, help="CSV of psi values")
    p_solve.add_argument("--labels", required=True, help="CSV of binary labels")
    p_solve.add_argument("--metric", required=True)
    p_solve.add_argument("--solver", choices=("auto", "admm", "lp"), default="auto")
    p_solve.add_argument("--iters", type=int, default=None, help="solver iteration cap")

    p_check = sub.add_parser(
        "check", help="compile a metric and print its coefficient grids"
    )
    p_check.add_argument("--metric", required=True)
    p_check.add_argument("--n", type=int, required=True, help="sample count")

    return parser


# ---------------------------------------------------------------------------
# Helpers.


def _load_metric_cli(spec: str) -> MetricExpr:
    try:
        return load_metric(spec)
    except KeyError as exc:
        raise DataError(str(exc)) from exc


def _read_vector(path: str, what: str) -> np.ndarray:
    """One float per row, first column; an optional header row is skipped."""
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} file not found: {path}")
    values = []
    with p.open("r", newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row and row[0].strip() != ""]
    for i, row in enumerate(rows):
        cell = row[0].strip()
        try:
            values.append(float(cell))
        except ValueError:
            if i == 0:
                continue  # header row
            raise DataError(
                f"{path}: non-numeric {what} value {cell!r} at row {i + 1}"
            ) from None
    if not values:
        raise DataError(f"{path}: no {what} values found")
    arr = np.asarray(values, dtype=float)
    if not np.isfinite(arr).all():
        raise DataError(f"{path}: non-finite {what} value")
    return arr


def _model_features(model, ds: Dataset) -> np.ndarray:
    """Apply the model's stored standardization to a raw dataset."""
    if model.mean is None:
        x = ds.x
    else:
        if model.columns is not None:
            index = {c: j for j, c in enumerate(ds.columns)}
            missing = [c for c in model.columns if c not in index]
            if missing:
                raise DataError(
                    f"dataset lacks columns required by the model: {missing}"
                )
            x = ds.x[:, [index[c] for c in model.columns]]
        else:
            x = ds.x
        if x.shape[1] != model.mean.shape[0]:
            raise DataError(
                f"dataset has {x.shape[1]} features but the model "
                f"standardization expects {model.mean.shape[0]}"
            )
        x = (x - model.mean) / model.std
    if x.shape[1] != model.architecture[0]:
        raise DataError(
            f"dataset has {x.shape[1]} features but the model "
            f"expects {model.architecture[0]}"
        )
    return x


def _grid_csv(grid: np.ndarray) -> str:
    return "\n".join(",".join(repr(float(v)) for v in row) for row in grid)


# ---------------------------------------------------------------------------
# Subcommands.


def _cmd_train(args) -> int:
    ds = load_csv(args.data)
    expr = _load_metric_cli(args.metric)

    if args.val is not None:
        ds_val_raw = load_csv(args.val)
        if ds_val_raw.columns != ds.columns:
            raise DataError(
                "validation columns do not match training columns: "
                f"{list(ds_val_raw.columns)} vs {list(ds.columns)}"
            )
        mean, std, keep = fit_standardization(ds.x)
        if not keep.any():
            raise DataError("all feature columns have zero variance")
        kept_cols = tuple(c for c, k in zip(ds.columns, keep) if k)
        ds_train = apply_standardization(ds, mean, std, keep, kept_cols)
        ds_val = apply_standardization(ds_val_raw, mean, std, keep, kept_cols)
    else:
        split_seed = args.seed if args.split_seed is None else args.split_seed
        ds_train, ds_val, _ = split(ds, seed=split_seed)

    try:
        arch = parse_architecture(args.model, ds_train.x.shape[1])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    cfg = TrainConfig(
        metric=expr,
        architecture=arch,
        epochs=args.epochs,
        lr=args.lr,
        optimizer=args.optimizer,
        l2=args.l2,
        batch_size=args.batch,
        objective=args.objective,
        seed=args.seed,
        loss_cfg=LossConfig(solver=args.solver),
    )
    result = train(cfg, ds_train.x, ds_train.y, ds_val.x, ds_val.y)

    model = result.model
    model.mean = ds_train.mean
    model.std = ds_train.std
    model.columns = ds_train.columns
    save_model(model, args.out)

    history_path = args.history
    if history_path is None:
        history_path = str(Path(args.out).with_suffix("")) + ".history.csv"
    with Path(history_path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "train_loss", "val_metric"])
        for epoch, loss, val in result.history:
            writer.writerow([epoch, repr(loss), repr(val)])

    report = {
        "metric": expr.name,
        "objective": args.objective,
        "model": args.model,
        "epochs": args.epochs,
        "best_epoch": result.best_epoch,
        "best_val_metric": result.best_val,
        "n_train": int(ds_train.n),
        "n_val": int(ds_val.n),
        "model_path": str(args.out),
        "history_path": str(history_path),
    }
    print(json.dumps(report, indent=2))
    return 0


def _cmd_eval(args) -> int:
    try:
        model = load_model(args.model)
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"{args.model}: invalid model file ({exc})") from exc
    ds = load_csv(args.data)
    x = _model_features(model, ds)
    yhat = predict(model, x)

    report = {}
    for token in args.metrics.split(","):
        token = token.strip()
        if not token:
            continue
        expr = _load_metric_cli(token)
        try:
            value = evaluate_discrete(expr, yhat, ds.y)
        except ValueError:
            value = float("nan")
        report[expr.name] = None if np.isnan(value) else float(value)
    print(json.dumps(report, indent=2))
    return 0


def _cmd_solve(args) -> int:
    psi = _read_vector(args.potentials, "potential")
    y = _read_vector(args.labels, "label")
    if not np.isin(y, (0.0, 1.0)).all():
        raise DataError(f"{args.labels}: labels must be 0 or 1")
    if psi.shape[0] != y.shape[0]:
        raise DataError(
            f"length mismatch: {psi.shape[0]} potentials vs {y.shape[0]} labels"
        )
    expr = _load_metric_cli(args.metric)
    cfg = LossConfig(solver=args.solver)
    if args.iters is not None:
        cfg.max_iters = args.iters
    try:
        res = ap_objective(psi, y, expr, cfg)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    objective = -(res.value + float(psi @ y))
    q_marg = res.grad + y
    writer = csv.writer(sys.stdout)
    writer.writerow(["objective", repr(objective)])
    writer.writerow(["sample", "q_marginal", "gradient"])
    for i in range(psi.shape[0]):
        writer.writerow([i + 1, repr(float(q_marg[i])), repr(float(res.grad[i]))])
    return 0


def _cmd_check(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    expr = _load_metric_cli(args.metric)
    cm = compile_metric(expr, args.n)
    lines = [
        f"metric,{expr.name}",
        f"n,{cm.n}",
        f"regime,{cm.regime}",
        f"constraints,{len(expr.constraints)}",
        "slope",
        _grid_csv(cm.slope),
        "inter",
        _grid_csv(cm.inter),
    ]
    print("\n".join(lines))
    return 0


# ---------------------------------------------------------------------------
# Entry points.


def cli_main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required (train, eval, solve, check)")
        handler = {
            "train": _cmd_train,
            "eval": _cmd_eval,
            "solve": _cmd_solve,
            "check": _cmd_check,
        }[args.command]
        return handler(args)
    except SystemExit as exc:  # argparse --help
        code = exc.code
        return int(code) if code is not None else 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (
        DataError,
        FileNotFoundError,
        MetricSyntaxError,
        MetricValueError,
    ) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
