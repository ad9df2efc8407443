"""CSV ingestion, dataset splitting, and feature standardization."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np


class DataError(Exception):
    """Malformed input data (bad CSV, labels, or shapes)."""


@dataclass
class Dataset:
    """A feature matrix with binary labels and optional scaling stats.

    mean/std are per-feature standardization parameters fitted on some
    training split; None until standardization is applied.
    """

    x: np.ndarray
    y: np.ndarray
    columns: tuple[str, ...]
    mean: np.ndarray | None = None
    std: np.ndarray | None = None

    @property
    def n(self) -> int:
        return self.x.shape[0]


def load_csv(path: str | Path, label_column: str = "label") -> Dataset:
    """Read a headered CSV into features and binary labels.

    Parameters
    ----------
    path : str or Path
        CSV file with a header row; every non-label column must be
        numeric and finite.
    label_column : str
        Name of the label column; its values must be 0 or 1.

    Returns
    -------
    Dataset

    Raises
    ------
    DataError
        Missing file or label column, a non-numeric or non-finite cell
        (reported with row and column), or a non-binary label.
    """
    path = Path(path)
    if not path.is_file():
        raise DataError(f"data file not found: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header required") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(
                f"{path}: label column {label_column!r} not in header {header}"
            )
        label_idx = header.index(label_column)
        feat_idx = [j for j in range(len(header)) if j != label_idx]
        rows: list[list[float]] = []
        labels: list[float] = []
        for rnum, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {rnum} has {len(row)} cells, expected "
                    f"{len(header)}"
                )
            vals = []
            for j in range(len(header)):
                cell = row[j].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: non-numeric value {cell!r} at row {rnum}, "
                        f"column {header[j]!r}"
                    ) from None
                if not np.isfinite(v):
                    raise DataError(
                        f"{path}: non-finite value {cell!r} at row {rnum}, "
                        f"column {header[j]!r}"
                    )
                vals.append(v)
            lab = vals[label_idx]
            if lab not in (0.0, 1.0):
                raise DataError(
                    f"{path}: non-binary label {row[label_idx]!r} at row {rnum}"
                )
            labels.append(lab)
            rows.append([vals[j] for j in feat_idx])
    x = np.asarray(rows, dtype=float).reshape(len(rows), len(feat_idx))
    y = np.asarray(labels, dtype=float)
    return Dataset(x=x, y=y, columns=tuple(header[j] for j in feat_idx))


def save_csv(ds: Dataset, path: str | Path, label_column: str = "label") -> None:
    """Write a dataset back out; inverse of load_csv for unscaled data."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(ds.columns) + [label_column])
        for row, lab in zip(ds.x, ds.y):
            writer.writerow([repr(float(v)) for v in row] + [int(lab)])


def fit_standardization(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-feature mean/std plus a keep-mask excluding zero-variance columns."""
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    keep = std > 0.0
    return mean, std, keep


def apply_standardization(
    ds: Dataset, mean: np.ndarray, std: np.ndarray, keep: np.ndarray,
    columns: tuple[str, ...],
) -> Dataset:
    x = (ds.x[:, keep] - mean[keep]) / std[keep]
    return Dataset(
        x=x, y=ds.y, columns=columns, mean=mean[keep], std=std[keep]
    )


def split(
    ds: Dataset,
    train_frac: float = 0.7,
    val_frac_of_train: float = 0.2,
    seed: int = 0,
) -> tuple[Dataset, Dataset, Dataset]:
    """Shuffle and split into train/val/test with train-fitted scaling.

    Parameters
    ----------
    ds : Dataset
        Unscaled data.
    train_frac : float
        Fraction of all rows given to train+val (the rest is test).
    val_frac_of_train : float
        Fraction of the train+val block held out for validation.
    seed : int
        Shuffle seed.

    Returns
    -------
    (train, val, test) : Dataset triple
        Disjoint, covering the input; features standardized with the
        train split's statistics.  Zero-variance columns are dropped
        with a warning.

    Raises
    ------
    ValueError
        Fractions outside (0, 1) or any empty split.
    """
    if not (0.0 < train_frac < 1.0 and 0.0 < val_frac_of_train < 1.0):
        raise ValueError("fractions must be in (0, 1)")
    n = ds.n
    order = np.random.default_rng(seed).permutation(n)
    n_block = int(round(train_frac * n))
    n_val = int(round(val_frac_of_train * n_block))
    n_train = n_block - n_val
    if n_train < 1 or n_val < 1 or n - n_block < 1:
        raise ValueError(
            f"split of {n} rows gives empty parts "
            f"({n_train}/{n_val}/{n - n_block})"
        )
    parts = (
        order[:n_train],
        order[n_train:n_block],
        order[n_block:],
    )
    raw = [Dataset(x=ds.x[p], y=ds.y[p], columns=ds.columns) for p in parts]
    mean, std, keep = fit_standardization(raw[0].x)
    if not keep.all():
        dropped = [c for c, k in zip(ds.columns, keep) if not k]
        warnings.warn(
            f"dropping zero-variance columns: {dropped}", stacklevel=2
        )
    columns = tuple(c for c, k in zip(ds.columns, keep) if k)
    train, val, test = (
        apply_standardization(part, mean, std, keep, columns) for part in raw
    )
    return train, val, test
