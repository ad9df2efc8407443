"""Adversarial training of binary classifiers for confusion-matrix metrics."""

from .admm import (
    AdmmCache,
    AdmmResult,
    AdmmWorkspace,
    assemble,
    build_cache,
    solve,
)
from .data import (
    DataError,
    Dataset,
    apply_standardization,
    fit_standardization,
    load_csv,
    save_csv,
    split,
)
from .dsl import (
    ConfusionCounts,
    MetricConstraint,
    MetricExpr,
    MetricSyntaxError,
    MetricValueError,
    evaluate_constraint_discrete,
    evaluate_discrete,
    parse_metric,
)
from .grids import (
    CompiledMetric,
    ConstraintLinearForm,
    compile_constraint,
    compile_metric,
    with_constraint_forms,
)
from .library import corpus_names, load_metric, metric_source
from .loss import (
    LossConfig,
    LossResult,
    LossWorkspace,
    SolverStats,
    ap_objective,
)
from .lp import GameSolution, game_value_and_q
from .marginals import expected_metric, is_in_delta, random_marginal
from .models import (
    Model,
    backward,
    forward,
    init_model,
    load_model,
    parse_architecture,
    predict,
    save_model,
)
from .projection import project_delta, project_delta_reference
from .simplex import SolverError
from .train import TrainConfig, TrainResult, train, validation_metric

__version__ = "0.1.0"

__all__ = [
    "ConfusionCounts",
    "MetricConstraint",
    "MetricExpr",
    "MetricSyntaxError",
    "MetricValueError",
    "evaluate_constraint_discrete",
    "evaluate_discrete",
    "parse_metric",
    "CompiledMetric",
    "ConstraintLinearForm",
    "compile_constraint",
    "compile_metric",
    "with_constraint_forms",
    "expected_metric",
    "is_in_delta",
    "random_marginal",
    "project_delta",
    "project_delta_reference",
    "AdmmCache",
    "AdmmResult",
    "AdmmWorkspace",
    "assemble",
    "build_cache",
    "solve",
    "GameSolution",
    "game_value_and_q",
    "SolverError",
    "corpus_names",
    "load_metric",
    "metric_source",
    "LossConfig",
    "LossResult",
    "LossWorkspace",
    "SolverStats",
    "ap_objective",
    "Model",
    "backward",
    "forward",
    "init_model",
    "load_model",
    "parse_architecture",
    "predict",
    "save_model",
    "TrainConfig",
    "TrainResult",
    "train",
    "validation_metric",
    "DataError",
    "Dataset",
    "apply_standardization",
    "fit_standardization",
    "load_csv",
    "save_csv",
    "split",
    "__version__",
]
