"""Compile metric expressions into batch-size-specific coefficient grids.

For a fixed batch size n, every valid metric is affine in the true-positive
count once the predicted-positive count k and the actual-positive count l are
held fixed: value = slope(k,l) * TP + inter(k,l).  The compiler extracts the
two (n+1) x (n+1) grids by evaluating the expression over the feasible TP
range of each cell and rejects expressions that are not affine there.

The grids drive both the expected-metric computation over marginal label
distributions and the game-solver assemblies.  Special-case flags are baked
in: with the positive flag, row/column 0 of both grids are zero and the (0,0)
cell's value 1 is carried separately as a prob(all-zeros) * prob(all-zeros)
term; the negative flag mirrors this at row/column n.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dsl import (
    Expr,
    MetricConstraint,
    MetricExpr,
    MetricValueError,
    evaluate_cell,
    special_value,
)

REGIME_NO = "NoSpecial"
REGIME_POS = "PosSpecial"
REGIME_NEG = "NegSpecial"
REGIME_BOTH = "BothSpecial"

# Affinity check: scaled second differences of the cell values must vanish.
AFFINE_TOL = 1e-9


@dataclass(frozen=True)
class ConstraintLinearForm:
    """Linear form <b_matrix, P> + mu representing E_P[constraint metric vs y].

    b_matrix columns are indexed by the predicted-positive count k = 1..n;
    rows by sample.  tau is the required lower bound on the expectation.
    """

    b_matrix: np.ndarray
    mu: float
    tau: float

    @property
    def n(self) -> int:
        return self.b_matrix.shape[0]


@dataclass(frozen=True)
class CompiledMetric:
    """Coefficient grids of one metric at one batch size."""

    n: int
    slope: np.ndarray  # (n+1, n+1), indexed [k, l]
    inter: np.ndarray  # (n+1, n+1)
    regime: str
    expr: MetricExpr
    constraint_forms: tuple[ConstraintLinearForm, ...] = ()

    @property
    def pos_special(self) -> bool:
        return self.regime in (REGIME_POS, REGIME_BOTH)

    @property
    def neg_special(self) -> bool:
        return self.regime in (REGIME_NEG, REGIME_BOTH)

    @property
    def has_constraints(self) -> bool:
        return len(self.expr.constraints) > 0


def feasible_tp_range(k: int, l: int, n: int) -> range:
    """Feasible TP values with k predicted and l actual positives out of n."""
    return range(max(0, k + l - n), min(k, l) + 1)


def _fit_cell(body: Expr, pos: bool, neg: bool, k: int, l: int, n: int,
              name: str) -> tuple[float, float]:
    """Affine coefficients (slope, inter) of one (k, l) cell.

    Cells with a single feasible TP value get slope 0 by convention; that
    split is expectation-equivalent because TP is forced there.
    """
    ts = feasible_tp_range(k, l, n)
    try:
        vals = [evaluate_cell(body, pos, neg, t, k, l, n) for t in ts]
    except MetricValueError as exc:
        raise MetricValueError(f"metric {name!r}: {exc}") from None
    for v in vals:
        if not np.isfinite(v):
            raise MetricValueError(
                f"metric {name!r}: non-finite value {v}", (k, l)
            )
    if len(vals) == 1:
        return 0.0, vals[0]
    slope = (vals[-1] - vals[0]) / (ts[-1] - ts[0])
    inter = vals[0] - slope * ts[0]
    if len(vals) >= 3:
        scale = max(1.0, max(abs(v) for v in vals))
        arr = np.asarray(vals)
        second = arr[2:] - 2.0 * arr[1:-1] + arr[:-2]
        if np.max(np.abs(second)) > AFFINE_TOL * scale:
            raise MetricValueError(
                f"metric {name!r} is not affine in the true-positive count",
                (k, l),
            )
    return slope, inter


def compile_metric(expr: MetricExpr, n: int) -> CompiledMetric:
    """Compile a parsed metric for batch size n.

    Raises MetricValueError when the body is undefined at a cell not covered
    by a declared special case, or fails the affinity criterion.
    """
    if n < 1:
        raise ValueError("batch size must be at least 1")
    slope = np.zeros((n + 1, n + 1))
    inter = np.zeros((n + 1, n + 1))
    for k in range(n + 1):
        for l in range(n + 1):
            s, i = _fit_cell(
                expr.body, expr.pos_special, expr.neg_special, k, l, n, expr.name
            )
            slope[k, l] = s
            inter[k, l] = i
    # The flag-covered corners are handled by explicit prob(all-zeros) /
    # prob(all-ones) product terms downstream; store zeros in the grids so
    # nothing is counted twice.
    if expr.pos_special:
        inter[0, 0] = 0.0
    if expr.neg_special:
        inter[n, n] = 0.0
    if expr.pos_special and expr.neg_special:
        regime = REGIME_BOTH
    elif expr.pos_special:
        regime = REGIME_POS
    elif expr.neg_special:
        regime = REGIME_NEG
    else:
        regime = REGIME_NO
    slope.setflags(write=False)
    inter.setflags(write=False)
    return CompiledMetric(n=n, slope=slope, inter=inter, regime=regime, expr=expr)


def compile_constraint(
    c: MetricConstraint, y: np.ndarray, n: int, name: str = "constraint"
) -> ConstraintLinearForm:
    """Compile one constraint clause against fixed ground-truth labels.

    Only the l = sum(y) column of the constraint metric's grids is needed:
    the expectation over the predictor's marginal P reduces to

        E_P[metric(Yhat, y)] = inter(0, L)
            + sum_k [ slope(k, L) * <p_k, y> + (inter(k, L) - inter(0, L)) * r_k ]

    with r_k the probability of predicting exactly k positives, folded into
    the per-entry coefficients of b_matrix.
    """
    y = np.asarray(y, dtype=float)
    if y.shape != (n,):
        raise ValueError(f"labels must have shape ({n},)")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be binary")
    big_l = int(round(float(y.sum())))

    slope_col = np.zeros(n + 1)
    inter_col = np.zeros(n + 1)
    for k in range(n + 1):
        s, i = _fit_cell(c.body, c.pos_special, c.neg_special, k, big_l, n, name)
        slope_col[k] = s
        inter_col[k] = i

    ks = np.arange(1, n + 1, dtype=float)
    b_matrix = slope_col[1:][None, :] * y[:, None] + (
        (inter_col[1:] - inter_col[0]) / ks
    )[None, :]
    b_matrix.setflags(write=False)
    return ConstraintLinearForm(b_matrix=b_matrix, mu=float(inter_col[0]), tau=c.tau)


def with_constraint_forms(cm: CompiledMetric, y: np.ndarray) -> CompiledMetric:
    """Attach compiled constraint forms for the given labels."""
    forms = tuple(
        compile_constraint(c, y, cm.n, name=f"{cm.expr.name}#constraint{i + 1}")
        for i, c in enumerate(cm.expr.constraints)
    )
    return replace(cm, constraint_forms=forms)


def discrete_from_grids(cm: CompiledMetric, t: int, k: int, l: int) -> float:
    """Metric value at a discrete configuration, read off the grids."""
    n = cm.n
    v = special_value(cm.pos_special, cm.neg_special, k, l, n)
    if v is not None:
        return v
    return cm.slope[k, l] * t + cm.inter[k, l]
