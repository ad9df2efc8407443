"""Differentiable loss layer: per-sample potentials to (value, gradient).

For a minibatch with potentials psi and labels y the layer solves the inner
adversarial game over label marginals and returns

    value = -(game objective) - <y, psi>
    grad_i = (row sum of Q* at sample i) - y_i

so that minimizing `value` maximizes the adversarial metric guarantee and
the gradient has the familiar prediction-minus-label shape.  Unconstrained
metrics route to the operator-splitting solver; metrics with constraints
(or an explicit override) route to the exact LP.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .admm import (
    AdmmCache,
    DEFAULT_ITERS,
    DEFAULT_RHO,
    assemble,
    build_cache,
    solve,
)
from .dsl import MetricExpr
from .grids import CompiledMetric, compile_metric, with_constraint_forms
from .lp import game_value_and_q
from .simplex import SolverError

# The LP route scales as O(n^6); keep batches small there.
LP_BATCH_CAP = 15


@dataclass
class LossConfig:
    """Solver knobs for the loss layer.

    solver "auto" picks the splitting solver for unconstrained metrics and
    the LP for constrained ones; "admm" and "lp" force a route.  tol=None
    runs the splitting solver for exactly max_iters iterations.
    """

    solver: str = "auto"
    max_iters: int = DEFAULT_ITERS
    tol: float | None = None
    rho: float = DEFAULT_RHO
    lp_batch_cap: int = LP_BATCH_CAP


@dataclass
class SolverStats:
    path: str
    iterations: int
    residual_z: float
    residual_q: float
    converged: bool
    pivots: int = 0


@dataclass
class LossResult:
    """Loss value, per-sample gradient, and solver diagnostics."""

    value: float
    grad: np.ndarray
    solver_stats: SolverStats


@dataclass
class _CacheEntry:
    cm: CompiledMetric
    admm: AdmmCache | None


class LossWorkspace:
    """Compiled-grid and spectral caches keyed by (metric, batch size).

    A trailing smaller minibatch gets its own entry, so alternating batch
    sizes never recompile.  Safe for concurrent reads; insertion is
    effectively idempotent (recomputing an entry yields identical data).
    """

    def __init__(self) -> None:
        self._entries: dict[tuple[int, int], _CacheEntry] = {}

    def entry(self, metric: MetricExpr | CompiledMetric, n: int) -> _CacheEntry:
        expr = metric.expr if isinstance(metric, CompiledMetric) else metric
        key = (id(expr), n)
        got = self._entries.get(key)
        if got is None:
            if isinstance(metric, CompiledMetric) and metric.n == n:
                cm = metric
            else:
                cm = compile_metric(expr, n)
            got = _CacheEntry(cm=cm, admm=None)
            self._entries[key] = got
        return got

    def admm_cache(self, entry: _CacheEntry) -> AdmmCache:
        if entry.admm is None:
            entry.admm = build_cache(entry.cm)
        return entry.admm


_SHARED = LossWorkspace()


def ap_objective(
    psi: np.ndarray,
    y: np.ndarray,
    metric: MetricExpr | CompiledMetric,
    cfg: LossConfig | None = None,
    workspace: LossWorkspace | None = None,
) -> LossResult:
    """Loss value and exact subgradient for one minibatch.

    Parameters
    ----------
    psi : ndarray, shape (n,)
        Per-sample potentials from the model.
    y : ndarray, shape (n,)
        Binary ground-truth labels.
    metric : MetricExpr or CompiledMetric
        The target metric; recompiled and cached when the batch size
        differs from a passed compilation.
    cfg : LossConfig, optional
        Solver routing and iteration knobs.
    workspace : LossWorkspace, optional
        Cache holder; defaults to a process-wide shared cache.

    Returns
    -------
    LossResult
        value, grad (entries in [-1, 1]), and solver statistics.
    """
    cfg = cfg or LossConfig()
    ws = workspace if workspace is not None else _SHARED
    psi = np.asarray(psi, dtype=float)
    y = np.asarray(y, dtype=float)
    if psi.ndim != 1 or psi.shape != y.shape:
        raise ValueError("potentials and labels must be equal-length vectors")
    if not np.all((y == 0.0) | (y == 1.0)):
        raise ValueError("labels must be binary")
    n = psi.shape[0]

    entry = ws.entry(metric, n)
    cm = entry.cm
    constrained = cm.has_constraints
    if cfg.solver not in ("auto", "admm", "lp"):
        raise ValueError(f"unknown solver {cfg.solver!r}")
    if constrained and cfg.solver == "admm":
        raise ValueError(
            "metrics with constraints require the LP route"
        )
    use_lp = constrained or cfg.solver == "lp"

    if use_lp:
        if n > cfg.lp_batch_cap:
            raise SolverError(
                f"LP route capped at batch {cfg.lp_batch_cap}, got {n}"
            )
        cmc = with_constraint_forms(cm, y) if constrained else cm
        sol = game_value_and_q(cmc, psi, cmc.constraint_forms)
        objective = sol.value
        q = sol.q
        stats = SolverStats(
            path="lp",
            iterations=0,
            residual_z=0.0,
            residual_q=0.0,
            converged=True,
            pivots=sol.pivots,
        )
    else:
        aws = assemble(cm, psi, rho=cfg.rho, cache=ws.admm_cache(entry))
        res = solve(aws, max_iters=cfg.max_iters, tol=cfg.tol)
        objective = res.objective
        q = res.q
        stats = SolverStats(
            path="admm",
            iterations=res.iterations,
            residual_z=res.residual_z,
            residual_q=res.residual_q,
            converged=res.converged,
        )

    grad = q.sum(axis=1) - y
    value = -objective - float(psi @ y)
    return LossResult(value=value, grad=grad, solver_stats=stats)
