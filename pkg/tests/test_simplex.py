"""Dense simplex solver tests on hand-solvable linear programs."""

import numpy as np
import pytest

from apmetric.simplex import SolverError, simplex_solve


def test_basic_inequality_lp():
    # min -x1 - x2  s.t.  x1 + x2 <= 1, x >= 0: optimum 1 split anywhere,
    # objective -1.
    res = simplex_solve(
        c=np.array([-1.0, -1.0]),
        a_ub=np.array([[1.0, 1.0]]),
        b_ub=np.array([1.0]),
    )
    assert res.objective == pytest.approx(-1.0)
    assert res.x.sum() == pytest.approx(1.0)


def test_two_constraint_vertex():
    # min -3x - 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18: classic optimum
    # (2, 6) with objective -36.
    res = simplex_solve(
        c=np.array([-3.0, -5.0]),
        a_ub=np.array([[1.0, 0.0], [0.0, 2.0], [3.0, 2.0]]),
        b_ub=np.array([4.0, 12.0, 18.0]),
    )
    assert res.objective == pytest.approx(-36.0)
    np.testing.assert_allclose(res.x, [2.0, 6.0], atol=1e-9)


def test_equality_constraints():
    # min x1  s.t.  x1 + x2 = 1: put everything on x2.
    res = simplex_solve(
        c=np.array([1.0, 0.0]),
        a_eq=np.array([[1.0, 1.0]]),
        b_eq=np.array([1.0]),
    )
    assert res.objective == pytest.approx(0.0)
    np.testing.assert_allclose(res.x, [0.0, 1.0], atol=1e-9)


def test_dual_values_single_binding_row():
    # min -x  s.t. x <= 2: objective -2; relaxing the bound by db improves
    # the objective by -db, so the dual is -1.
    res = simplex_solve(
        c=np.array([-1.0]),
        a_ub=np.array([[1.0]]),
        b_ub=np.array([2.0]),
    )
    assert res.objective == pytest.approx(-2.0)
    assert res.duals_ub[0] == pytest.approx(-1.0)


def test_nonbinding_row_has_zero_dual():
    res = simplex_solve(
        c=np.array([-1.0]),
        a_ub=np.array([[1.0], [1.0]]),
        b_ub=np.array([2.0, 5.0]),
    )
    assert res.duals_ub[1] == pytest.approx(0.0)


def test_degenerate_vertex():
    # Three planes through the same optimum; must not cycle.
    res = simplex_solve(
        c=np.array([-1.0, -1.0]),
        a_ub=np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]]),
        b_ub=np.array([1.0, 1.0, 2.0]),
    )
    assert res.objective == pytest.approx(-2.0)


def test_infeasible_raises():
    with pytest.raises(SolverError):
        simplex_solve(
            c=np.array([1.0]),
            a_ub=np.array([[-1.0]]),
            b_ub=np.array([-2.0]),
            a_eq=np.array([[1.0]]),
            b_eq=np.array([1.0]),
        )


def test_unbounded_raises():
    # No constraint rows at all.
    with pytest.raises(SolverError):
        simplex_solve(c=np.array([-1.0]))
    # Rows present but the improving direction is unbounded.
    with pytest.raises(SolverError):
        simplex_solve(
            c=np.array([-1.0, 0.0]),
            a_ub=np.array([[0.0, 1.0]]),
            b_ub=np.array([1.0]),
        )


def test_no_rows_bounded_returns_zero():
    res = simplex_solve(c=np.array([2.0, 0.0]))
    assert res.objective == 0.0
    np.testing.assert_array_equal(res.x, [0.0, 0.0])


def test_mixed_equality_and_inequality():
    # Transportation-style: move one unit, cheaper route capped at 0.4.
    # min 1*f1 + 3*f2  s.t. f1 + f2 = 1, f1 <= 0.4.
    res = simplex_solve(
        c=np.array([1.0, 3.0]),
        a_ub=np.array([[1.0, 0.0]]),
        b_ub=np.array([0.4]),
        a_eq=np.array([[1.0, 1.0]]),
        b_eq=np.array([1.0]),
    )
    assert res.objective == pytest.approx(0.4 + 3 * 0.6)
    np.testing.assert_allclose(res.x, [0.4, 0.6], atol=1e-9)


def test_random_lps_against_reference(rng):
    """Cross-check objectives on small random feasible LPs with a generic
    convex solver."""
    import cvxpy as cp

    for trial in range(20):
        m, nv = 4, 6
        a = rng.normal(size=(m, nv))
        x_feas = np.abs(rng.normal(size=nv))
        b = a @ x_feas + np.abs(rng.normal(size=m))  # strictly feasible
        c = rng.normal(size=nv)
        if c.min() < 0:
            c = c - c.min() + 0.05  # keep the problem bounded
        res = simplex_solve(c=c, a_ub=a, b_ub=b)
        x = cp.Variable(nv, nonneg=True)
        prob = cp.Problem(cp.Minimize(c @ x), [a @ x <= b])
        prob.solve(solver=cp.CLARABEL)
        assert res.objective == pytest.approx(prob.value, abs=1e-7)
