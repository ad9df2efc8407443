"""Exact game LP tests against exhaustive-enumeration oracles."""

import numpy as np
import pytest

from apmetric.dsl import evaluate_constraint_discrete
from apmetric.grids import compile_metric, with_constraint_forms
from apmetric.library import load_metric
from apmetric.lp import build_lp, game_value_and_q, lp_to_text
from apmetric.marginals import expected_constraint, is_in_delta
from apmetric.oracles import brute_force_game, value_table
from tests.conftest import random_binary

VALUE_TOL = 1e-6


def constrained_game_oracle(expr, psi, y, n):
    """Game value with expectation constraints on the inner maximizer.

    Enumerates all 2^n support points and dualizes the inner linear
    program, leaving a single minimization over (q, u, m) that a generic
    solver handles:

        min u - sum_j tau_j m_j
        s.t. u - sum_j g_a^j m_j >= (payoff q)_a  for every pattern a,
             q in the probability simplex, m >= 0.
    """
    import cvxpy as cp

    from apmetric.marginals import bit_patterns

    psi = np.asarray(psi, dtype=float)
    pats = bit_patterns(n)
    payoff = value_table(expr, n) - (pats @ psi)[None, :]
    g_cols = []
    taus = []
    for c in expr.constraints:
        g_cols.append(
            np.array([
                evaluate_constraint_discrete(c, pats[a], y)
                for a in range(pats.shape[0])
            ])
        )
        taus.append(c.tau)
    g = np.column_stack(g_cols)
    tau = np.array(taus)

    q = cp.Variable(pats.shape[0], nonneg=True)
    u = cp.Variable()
    m = cp.Variable(len(taus), nonneg=True)
    prob = cp.Problem(
        cp.Minimize(u - tau @ m),
        [u - g @ m >= payoff @ q, cp.sum(q) == 1],
    )
    prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-11, tol_gap_rel=1e-11,
               tol_feas=1e-11)
    assert prob.status in ("optimal", "optimal_inaccurate")
    return float(prob.value)


def test_matches_brute_force_unconstrained(unconstrained_corpus, rng):
    for name, expr in unconstrained_corpus.items():
        for n in (1, 2, 3, 4):
            cm = compile_metric(expr, n)
            psi = rng.normal(scale=1.5, size=n)
            sol = game_value_and_q(cm, psi)
            want, _ = brute_force_game(expr, psi, n)
            assert sol.value == pytest.approx(want, abs=VALUE_TOL), (name, n)


def test_q_is_valid_marginal(rng):
    for name in ("f1", "kappa"):
        cm = compile_metric(load_metric(name), 6)
        for _ in range(5):
            sol = game_value_and_q(cm, rng.normal(size=6))
            assert is_in_delta(sol.q, tol=1e-7)
            assert sol.q.min() >= 0.0
            assert sol.q.max() <= 1.0 + 1e-9


def test_p_witness_is_valid_marginal(rng):
    cm = compile_metric(load_metric("f1"), 5)
    sol = game_value_and_q(cm, rng.normal(size=5))
    assert sol.p_witness is not None
    assert is_in_delta(sol.p_witness, tol=1e-7)


def test_deterministic(rng):
    cm = compile_metric(load_metric("gpr"), 6)
    psi = rng.normal(size=6)
    s1 = game_value_and_q(cm, psi)
    s2 = game_value_and_q(cm, psi)
    np.testing.assert_array_equal(s1.q, s2.q)
    assert s1.value == s2.value
    assert s1.pivots == s2.pivots


def test_constrained_value_matches_oracle(rng):
    for name in ("precision_gv_recall", "recall_gv_precision"):
        expr = load_metric(name)
        for n in (3, 4, 5):
            y = random_binary(rng, n, ensure_positive=True)
            cm = with_constraint_forms(compile_metric(expr, n), y)
            psi = rng.normal(scale=1.0, size=n)
            sol = game_value_and_q(cm, psi, cm.constraint_forms)
            want = constrained_game_oracle(expr, psi, y, n)
            assert sol.value == pytest.approx(want, abs=5e-6), (name, n)


def test_two_constraints_match_oracle(rng):
    expr = load_metric("precision_gv_recall_specificity")
    n = 4
    y = np.array([1.0, 0.0, 1.0, 0.0])
    cm = with_constraint_forms(compile_metric(expr, n), y)
    for _ in range(3):
        psi = rng.normal(size=n)
        sol = game_value_and_q(cm, psi, cm.constraint_forms)
        want = constrained_game_oracle(expr, psi, y, n)
        assert sol.value == pytest.approx(want, abs=5e-6)


def test_constraint_never_raises_value(rng):
    # Restricting the inner maximizer can only lower the game value.
    expr = load_metric("precision_gv_recall")
    for n in (4, 6, 8):
        y = random_binary(rng, n, ensure_positive=True)
        cm = compile_metric(expr, n)
        cmc = with_constraint_forms(cm, y)
        for _ in range(3):
            psi = rng.normal(size=n)
            free = game_value_and_q(cm, psi)
            tied = game_value_and_q(cmc, psi, cmc.constraint_forms)
            assert free.value >= tied.value - 1e-8


def test_witness_satisfies_constraints(rng):
    expr = load_metric("precision_gv_recall")
    for n in (4, 6, 8, 10):
        y = random_binary(rng, n, ensure_positive=True)
        cm = with_constraint_forms(compile_metric(expr, n), y)
        for _ in range(3):
            psi = rng.normal(size=n)
            sol = game_value_and_q(cm, psi, cm.constraint_forms)
            for form in cm.constraint_forms:
                got = expected_constraint(form, sol.p_witness)
                assert got >= form.tau - 1e-6


def test_beta_multipliers_nonnegative(rng):
    expr = load_metric("precision_gv_recall_specificity")
    y = np.array([1.0, 1.0, 0.0, 0.0, 1.0])
    cm = with_constraint_forms(compile_metric(expr, 5), y)
    sol = game_value_and_q(cm, rng.normal(size=5), cm.constraint_forms)
    assert sol.beta.shape == (2,)
    assert np.all(sol.beta >= -1e-12)


def test_lp_text_rendering():
    cm = compile_metric(load_metric("accuracy"), 2)
    lp = build_lp(cm, np.zeros(2), ())
    text = lp_to_text(lp)
    assert "minimize" in text
    assert "a[0,1]" in text
    assert "v" in text
