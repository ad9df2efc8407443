"""Splitting-solver tests: oracle agreement, caching, stopping modes."""

import numpy as np
import pytest

import apmetric.admm as admm_mod
from apmetric.admm import assemble, build_cache, solve, solve_sylvester
from apmetric.assembly import game_objective
from apmetric.grids import compile_metric
from apmetric.library import load_metric
from apmetric.marginals import is_in_delta
from apmetric.oracles import brute_force_game
from apmetric.simplex import SolverError

GAME_TOL = 5e-3


def test_accuracy_single_sample_game_value():
    # With zero potentials and one sample the game is matching pennies on
    # one bit: both players mix 50/50 and the value is 1/2.
    cm = compile_metric(load_metric("accuracy"), 1)
    ws = assemble(cm, np.zeros(1))
    res = solve(ws, max_iters=100)
    assert res.objective == pytest.approx(0.5, abs=1e-6)
    assert res.q[0, 0] == pytest.approx(0.5, abs=1e-6)


def test_matches_brute_force_small(rng):
    for name in ("accuracy", "f1", "gpr", "informedness"):
        expr = load_metric(name)
        for n in (2, 3, 4):
            cm = compile_metric(expr, n)
            cache = build_cache(cm)
            for _ in range(3):
                psi = rng.normal(scale=1.0, size=n)
                ws = assemble(cm, psi, cache=cache)
                res = solve(ws, max_iters=2000, tol=1e-6)
                want, _ = brute_force_game(expr, psi, n)
                assert res.objective == pytest.approx(want, abs=GAME_TOL)
                assert is_in_delta(res.q, tol=1e-8)


def test_fixed_iterations_mode_runs_exactly():
    cm = compile_metric(load_metric("f1"), 6)
    ws = assemble(cm, np.linspace(-1, 1, 6))
    res = solve(ws, max_iters=37, tol=None)
    assert res.iterations == 37
    assert not res.converged


def test_tol_mode_reports_best_visited():
    cm = compile_metric(load_metric("f1"), 6)
    psi = np.linspace(-1, 1, 6)
    res = solve(assemble(cm, psi), max_iters=500, tol=1e-7)
    # The reported objective must be at least as good as a short run's.
    res_short = solve(assemble(cm, psi), max_iters=5, tol=1e-7)
    assert res.objective <= res_short.objective + 1e-12


def test_objective_recomputable_from_marginal(rng):
    cm = compile_metric(load_metric("f2"), 5)
    psi = rng.normal(size=5)
    ws = assemble(cm, psi)
    res = solve(ws, max_iters=300, tol=1e-8)
    assert game_objective(ws.cache.gc, psi, res.q) == pytest.approx(
        res.objective, abs=1e-9
    )


def test_deterministic(rng):
    cm = compile_metric(load_metric("kappa"), 7)
    psi = rng.normal(size=7)
    r1 = solve(assemble(cm, psi), max_iters=150)
    r2 = solve(assemble(cm, psi), max_iters=150)
    np.testing.assert_array_equal(r1.q, r2.q)
    assert r1.objective == r2.objective


def test_cache_reuse_skips_spectral_work(rng):
    cm = compile_metric(load_metric("f1"), 8)
    cache = build_cache(cm)
    before = admm_mod.EIG_BUILD_COUNT
    for _ in range(3):
        ws = assemble(cm, rng.normal(size=8), cache=cache)
        solve(ws, max_iters=20)
    assert admm_mod.EIG_BUILD_COUNT == before


def test_constrained_metric_rejected():
    cm = compile_metric(load_metric("precision_gv_recall"), 4)
    with pytest.raises(SolverError, match="constraint"):
        assemble(cm, np.zeros(4))


def test_sylvester_solver_residuals(rng):
    """The cached X-update solves A X Bt + X = Ft to near machine precision."""
    for name in ("accuracy", "f1", "kappa", "mcc"):
        expr = load_metric(name)
        for n in (1, 2, 5, 12):
            cache = build_cache(compile_metric(expr, n))
            gc = cache.gc
            a = np.ones((n, n))
            bbar = float(n) * (gc.b @ gc.b.T) + gc.c @ gc.b.T + gc.b @ gc.c.T
            bt = bbar @ cache.cct_inv
            for _ in range(2):
                f = rng.normal(size=(n, n))
                x = solve_sylvester(cache, f)
                ft = -f @ cache.cct_inv
                resid = np.linalg.norm(a @ x @ bt + x - ft)
                assert resid <= 1e-8 * (1.0 + np.linalg.norm(ft))


def test_workspace_shape_validation():
    cm = compile_metric(load_metric("accuracy"), 3)
    with pytest.raises(ValueError):
        assemble(cm, np.zeros(4))
