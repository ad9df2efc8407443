"""Grid compilation tests: coefficient extraction, regimes, constraints."""

import numpy as np
import pytest

from apmetric.dsl import (
    ConfusionCounts,
    MetricValueError,
    evaluate_cell,
    evaluate_constraint_discrete,
    parse_metric,
)
from apmetric.grids import (
    REGIME_BOTH,
    REGIME_NEG,
    REGIME_NO,
    REGIME_POS,
    compile_constraint,
    compile_metric,
    discrete_from_grids,
    feasible_tp_range,
    with_constraint_forms,
)
from apmetric.marginals import expected_constraint, point_mass

GRID_TOL = 1e-12


def test_feasible_tp_range_hand_cases():
    assert list(feasible_tp_range(2, 1, 3)) == [0, 1]
    assert list(feasible_tp_range(3, 2, 4)) == [1, 2]
    assert list(feasible_tp_range(0, 2, 4)) == [0]
    assert list(feasible_tp_range(4, 4, 4)) == [4]


def test_regimes(corpus):
    n = 6
    assert compile_metric(corpus["accuracy"], n).regime == REGIME_NO
    assert compile_metric(corpus["f1"], n).regime == REGIME_POS
    assert compile_metric(corpus["specificity"], n).regime == REGIME_NEG
    assert compile_metric(corpus["informedness"], n).regime == REGIME_BOTH


def test_special_corner_slots_are_zeroed(corpus):
    n = 5
    cm_pos = compile_metric(corpus["f1"], n)
    assert cm_pos.inter[0, 0] == 0.0
    cm_neg = compile_metric(corpus["specificity"], n)
    assert cm_neg.inter[n, n] == 0.0
    cm_both = compile_metric(corpus["informedness"], n)
    assert cm_both.inter[0, 0] == 0.0
    assert cm_both.inter[n, n] == 0.0


def test_grids_reproduce_cell_values(corpus):
    """slope[k, l] * t + inter[k, l] equals direct evaluation everywhere."""
    n = 6
    for expr in corpus.values():
        cm = compile_metric(expr, n)
        for k in range(n + 1):
            for l in range(n + 1):
                for t in feasible_tp_range(k, l, n):
                    direct = evaluate_cell(
                        expr.body, expr.pos_special, expr.neg_special,
                        t, k, l, n,
                    )
                    assert discrete_from_grids(cm, t, k, l) == pytest.approx(
                        direct, abs=GRID_TOL
                    )


def test_grids_are_finite(corpus):
    for expr in corpus.values():
        cm = compile_metric(expr, 8)
        assert np.isfinite(cm.slope).all()
        assert np.isfinite(cm.inter).all()


def test_nonaffine_metric_rejected():
    for src in (
        "sq { define: (tp * tp) / (all * all) }",
        "shifted { define: tp / (tp + 1) }",
    ):
        expr = parse_metric(src)
        with pytest.raises(MetricValueError, match="not affine"):
            compile_metric(expr, 5)


def test_accuracy_grid_values():
    expr = parse_metric("accuracy { define: (tp + tn) / all }")
    n = 4
    cm = compile_metric(expr, n)
    # accuracy(t; k, l) = (2t + n - k - l) / n: slope 2/n, intercept
    # (n-k-l)/n wherever more than one true-positive count is feasible
    # (single-point cells store the value itself with zero slope).
    for k in range(n + 1):
        for l in range(n + 1):
            if len(feasible_tp_range(k, l, n)) > 1:
                assert cm.slope[k, l] == pytest.approx(2 / n)
                assert cm.inter[k, l] == pytest.approx((n - k - l) / n)


def test_constraint_form_matches_discrete_evaluation(corpus, rng):
    """<B, point_mass(yhat)> + mu equals the discrete constraint value."""
    n = 7
    for name in ("precision_gv_recall", "recall_gv_precision"):
        expr = corpus[name]
        for _ in range(30):
            y = (rng.random(n) < 0.6).astype(float)
            cm = with_constraint_forms(compile_metric(expr, n), y)
            for form, c in zip(cm.constraint_forms, expr.constraints):
                yhat = (rng.random(n) < 0.5).astype(float)
                got = expected_constraint(form, point_mass(yhat))
                want = evaluate_constraint_discrete(c, yhat, y)
                assert got == pytest.approx(want, abs=1e-10)
                assert form.tau == pytest.approx(c.tau)


def test_two_constraint_metric_forms(corpus, rng):
    expr = corpus["precision_gv_recall_specificity"]
    n = 6
    y = np.array([1.0, 1.0, 0.0, 0.0, 1.0, 0.0])
    cm = with_constraint_forms(compile_metric(expr, n), y)
    assert len(cm.constraint_forms) == 2
    for form, c in zip(cm.constraint_forms, expr.constraints):
        for _ in range(20):
            yhat = (rng.random(n) < 0.5).astype(float)
            got = expected_constraint(form, point_mass(yhat))
            want = evaluate_constraint_discrete(c, yhat, y)
            assert got == pytest.approx(want, abs=1e-10)


def test_compile_constraint_requires_affinity():
    # Nonaffinity is only detectable where three or more true-positive
    # counts are feasible, hence the larger batch.
    expr = parse_metric(
        "m { define: tp / pp constraint: (tp * tp) / all >= 0.5"
        " special_case_positive }"
    )
    y = np.array([1.0, 0.0, 1.0, 1.0, 0.0, 0.0])
    with pytest.raises(MetricValueError, match="not affine"):
        with_constraint_forms(compile_metric(expr, 6), y)


def test_uncovered_division_by_zero_rejected_at_compile():
    expr = parse_metric("m { define: tp / pp }")
    with pytest.raises(MetricValueError, match="division by zero"):
        compile_metric(expr, 3)


def test_cell_value_against_confusion_counts(corpus):
    # evaluate_cell agrees with evaluating the body on explicit counts.
    expr = corpus["kappa"]
    n = 6
    t, k, l = 2, 3, 4
    c = ConfusionCounts.from_cell(t, k, l, n)
    assert c.tp == t and c.pp == k and c.ap == l and c.all == n
