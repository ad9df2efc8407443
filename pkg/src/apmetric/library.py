"""Bundled metric definitions (.apm files) and loading helpers."""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from .dsl import MetricExpr, parse_metric

UNCONSTRAINED = (
    "accuracy",
    "precision",
    "recall",
    "specificity",
    "f1",
    "f2",
    "gpr",
    "balanced_accuracy",
    "informedness",
    "kappa",
    "mcc",
)
CONSTRAINED = (
    "precision_gv_recall",
    "precision_gv_recall_60",
    "precision_gv_recall_95",
    "recall_gv_precision",
    "precision_gv_recall_specificity",
)


def corpus_names() -> tuple[str, ...]:
    """Names of every bundled metric."""
    return UNCONSTRAINED + CONSTRAINED


def metric_source(name: str) -> str:
    """Source text of a bundled metric."""
    ref = resources.files("apmetric") / "metrics" / f"{name}.apm"
    if not ref.is_file():
        raise KeyError(f"no bundled metric named {name!r}")
    return ref.read_text(encoding="utf-8")


def load_metric(spec: str | Path) -> MetricExpr:
    """Parse a metric from a file path or, failing that, the bundled corpus.

    Accepts a path to an .apm file; when the path does not exist, the bare
    stem is looked up among the bundled metrics so that names like
    "f1" or "f1.apm" work from any directory.
    """
    path = Path(spec)
    if path.is_file():
        return parse_metric(path.read_text(encoding="utf-8"))
    name = path.name
    if name.endswith(".apm"):
        name = name[: -len(".apm")]
    if path.parent == Path(".") or str(path.parent) in ("", "."):
        try:
            return parse_metric(metric_source(name))
        except KeyError:
            pass
    raise FileNotFoundError(f"metric file not found: {spec}")
