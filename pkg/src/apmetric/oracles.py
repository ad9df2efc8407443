"""Slow, independent reference computations used by the test suite.

Everything here works on explicit distributions over all 2^n binary vectors
or hands the problem to a generic convex solver, deliberately avoiding the
grid/marginal machinery of the fast path.
"""

from __future__ import annotations

import numpy as np

from .dsl import MetricExpr, evaluate_cell
from .marginals import bit_patterns


def value_table(expr: MetricExpr, n: int) -> np.ndarray:
    """V[a, b] = metric(pattern_a as prediction, pattern_b as truth)."""
    patterns = bit_patterns(n)
    m = patterns.shape[0]
    tp = (patterns @ patterns.T).astype(int)
    ksum = patterns.sum(axis=1).astype(int)
    cache: dict[tuple[int, int, int], float] = {}
    v = np.empty((m, m))
    for a in range(m):
        for b in range(m):
            key = (tp[a, b], ksum[a], ksum[b])
            val = cache.get(key)
            if val is None:
                val = evaluate_cell(
                    expr.body, expr.pos_special, expr.neg_special,
                    key[0], key[1], key[2], n,
                )
                cache[key] = val
            v[a, b] = val
    return v


def brute_force_expected_metric(
    expr: MetricExpr, pw: np.ndarray, qw: np.ndarray, n: int
) -> float:
    """Expected metric for explicit weights over all 2^n prediction and
    label vectors."""
    v = value_table(expr, n)
    return float(np.asarray(pw) @ v @ np.asarray(qw))


def brute_force_game(
    expr: MetricExpr, psi: np.ndarray, n: int
) -> tuple[float, np.ndarray]:
    """Adversarial game value by LP over the full 2^n label simplex.

    Solves min_{q in simplex} max_{a} sum_b q_b * (V[a, b] - psi . pattern_b)
    with a generic LP solver.  Returns (value, optimal full weights).
    """
    import cvxpy as cp

    psi = np.asarray(psi, dtype=float)
    patterns = bit_patterns(n)
    payoff = value_table(expr, n) - (patterns @ psi)[None, :]
    m = patterns.shape[0]
    q = cp.Variable(m, nonneg=True)
    t = cp.Variable()
    prob = cp.Problem(
        cp.Minimize(t),
        [payoff @ q <= t, cp.sum(q) == 1],
    )
    _solve_strict(prob)
    return float(t.value), np.maximum(np.asarray(q.value), 0.0)


def finite_diff_grad(fn, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (fn(x + e) - fn(x - e)) / (2.0 * h)
    return g


def projection_oracle(a: np.ndarray) -> np.ndarray:
    """Euclidean projection onto Delta by a generic QP solver."""
    import cvxpy as cp

    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    ks = np.arange(1, n + 1, dtype=float)
    p = cp.Variable((n, n), nonneg=True)
    cons = []
    for k in range(1, n + 1):
        cons.append(p[:, k - 1] <= cp.sum(p[:, k - 1]) / k)
    cons.append(cp.sum(p, axis=0) @ (1.0 / ks) <= 1)
    prob = cp.Problem(cp.Minimize(cp.sum_squares(p - a)), cons)
    _solve_strict(prob)
    return np.asarray(p.value)


def _solve_strict(prob) -> None:
    """Solve a cvxpy problem at tight tolerance, trying a couple of solvers."""
    import cvxpy as cp

    try:
        prob.solve(solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12,
                   tol_feas=1e-12)
    except (cp.error.SolverError, TypeError):
        prob.solve(solver=cp.ECOS, abstol=1e-12, reltol=1e-12, feastol=1e-12)
    if prob.status not in ("optimal", "optimal_inaccurate"):
        raise RuntimeError(f"reference solver failed: {prob.status}")
