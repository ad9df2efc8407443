"""Dense two-phase primal simplex for the game linear programs.

Minimizes c @ x subject to A_ub x <= b_ub, A_eq x = b_eq, x >= 0.  The
problems produced by this package are small (a few hundred rows), dense, and
need reliable dual values, which keeps a transparent tableau implementation
preferable to shelling out.

Reduced costs are recomputed from the current tableau on every iteration and
the tableau itself is refactorized from the original data at a fixed pivot
cadence, so numerical drift cannot steer pivot selection.  Entering columns
use the most-negative reduced cost, switching permanently to Bland's rule
once a stretch of degenerate pivots makes no progress; ratio-test ties are
otherwise broken toward the largest pivot element for stability.  Artificial
columns stay in the tableau during phase two with zero cost and are simply
barred from entering, so redundant rows need no special handling and dual
extraction always has a full basis.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-9
FEAS_TOL = 1e-7
STALL_LIMIT = 40
REFRESH_PIVOTS = 200


class SolverError(RuntimeError):
    """Raised when a game solve cannot produce a trustworthy answer."""


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    duals_ub: np.ndarray  # d(objective)/d(b_ub); nonpositive at binding rows
    duals_eq: np.ndarray
    pivots: int


def simplex_solve(
    c: np.ndarray,
    a_ub: np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
    a_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    max_pivots: int = 200_000,
) -> SimplexResult:
    # Escalating fallbacks for numerically nasty instances: a singular
    # basis means pivot selection was too permissive (retry with a stricter
    # stability floor); hitting the pivot cap means a degenerate vertex is
    # cycling (retry with a deterministic right-hand-side perturbation that
    # breaks the ties, then extract against the original data).
    plans = [
        (min(max_pivots, 20_000), 1e-7, 1e-9),
        (min(max_pivots, 60_000), 1e-4, 1e-8),
        (max_pivots, 1e-7, 1e-6),
    ]
    for i, (cap, floor, pert) in enumerate(plans):
        try:
            return _attempt(c, a_ub, b_ub, a_eq, b_eq, cap, floor, pert)
        except SolverError as err:
            msg = str(err)
            retryable = "singular" in msg or "pivot limit" in msg
            if i == len(plans) - 1 or not retryable:
                raise
    raise SolverError("unreachable")


def _attempt(
    c: np.ndarray,
    a_ub: np.ndarray | None,
    b_ub: np.ndarray | None,
    a_eq: np.ndarray | None,
    b_eq: np.ndarray | None,
    max_pivots: int,
    pivot_floor: float,
    perturb: float,
) -> SimplexResult:
    c = np.asarray(c, dtype=float)
    nx = c.size
    a_ub = np.zeros((0, nx)) if a_ub is None else np.asarray(a_ub, dtype=float)
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    a_eq = np.zeros((0, nx)) if a_eq is None else np.asarray(a_eq, dtype=float)
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    m_ub, m_eq = a_ub.shape[0], a_eq.shape[0]
    m = m_ub + m_eq

    if m == 0:
        # Only the sign bounds remain: zero is optimal iff no cost is
        # negative, otherwise pushing that coordinate is unbounded.
        if np.min(c, initial=0.0) < 0.0:
            raise SolverError("LP is unbounded")
        return SimplexResult(
            x=np.zeros(nx),
            objective=0.0,
            duals_ub=np.zeros(0),
            duals_eq=np.zeros(0),
            pivots=0,
        )

    a = np.vstack([a_ub, a_eq])
    b = np.concatenate([b_ub, b_eq])
    sign = np.where(b < 0, -1.0, 1.0)
    a = a * sign[:, None]
    b = b * sign

    # Standard form: originals, one slack per <= row, then artificials for
    # every row whose slack cannot start basic.
    slack = np.zeros((m, m_ub))
    for i in range(m_ub):
        slack[i, i] = sign[i]
    need_art = [i for i in range(m) if i >= m_ub or sign[i] < 0]
    art = np.zeros((m, len(need_art)))
    for j, i in enumerate(need_art):
        art[i, j] = 1.0
    astd = np.hstack([a, slack, art])
    n_real = nx + m_ub
    n_all = astd.shape[1]

    b_run = b
    if perturb > 0.0:
        jitter = np.random.default_rng(987654321).uniform(1.0, 2.0, m)
        b_run = b + perturb * (1.0 + np.abs(b)) * jitter

    tableau = np.hstack([astd, b_run[:, None]])
    basis = np.empty(m, dtype=int)
    for i in range(m):
        basis[i] = nx + i
    for j, i in enumerate(need_art):
        basis[i] = n_real + j

    aug = np.hstack([astd, b_run[:, None]])
    state = {"pivots": 0, "since_refresh": 0}

    def refactorize() -> None:
        # Rebuild the tableau as B^{-1} [A | b] from the untouched data so
        # per-pivot rounding cannot accumulate.
        try:
            fresh = np.linalg.solve(astd[:, basis], aug)
        except np.linalg.LinAlgError:
            raise SolverError("simplex basis became singular")
        tableau[:] = fresh
        state["since_refresh"] = 0

    def run_phase(cost: np.ndarray, n_enterable: int) -> None:
        bland = False
        stall = 0
        last_obj = np.inf
        while True:
            # Exact reduced costs for the current tableau; never updated
            # incrementally, so pivot choices cannot chase stale values.
            # Basic columns are barred from entering: their true reduced
            # cost is zero, and letting drift re-admit one would duplicate
            # a basis index.
            red = cost[:n_enterable] - cost[basis] @ tableau[:, :n_enterable]
            red[basis[basis < n_enterable]] = 0.0
            if bland:
                neg = np.flatnonzero(red < -PIVOT_TOL)
                enter = int(neg[0]) if neg.size else -1
            else:
                enter = int(np.argmin(red))
                if red[enter] >= -PIVOT_TOL:
                    enter = -1
            if enter < 0:
                if state["since_refresh"] == 0:
                    return
                # Confirm optimality against a freshly refactorized tableau.
                refactorize()
                red = cost[:n_enterable] - cost[basis] @ tableau[:, :n_enterable]
                red[basis[basis < n_enterable]] = 0.0
                if red.min() >= -PIVOT_TOL:
                    return
                continue
            col = tableau[:, enter]
            colmax = float(np.abs(col).max())
            eligible = col > PIVOT_TOL
            if not np.any(eligible):
                raise SolverError("linear program is unbounded")
            # Harris-style two-pass ratio test: allow a tiny feasibility
            # slack so the leaving row can be chosen for pivot magnitude,
            # which keeps the basis well conditioned.  Rows with pivots
            # below the stability floor are used only when nothing better
            # exists.
            strong = col > pivot_floor * max(1.0, colmax)
            rows = strong if np.any(strong) else eligible
            rhs = np.maximum(tableau[:, -1], 0.0)
            relaxed = np.full(m, np.inf)
            relaxed[rows] = (rhs[rows] + 1e-9 * (1.0 + rhs[rows])) / col[rows]
            tmax = float(relaxed.min())
            ratios = np.full(m, np.inf)
            ratios[rows] = rhs[rows] / col[rows]
            ties = np.flatnonzero(ratios <= tmax)
            if bland:
                leave = int(ties[np.argmin(basis[ties])])
            else:
                leave = int(ties[np.argmax(col[ties])])
            _pivot(tableau, basis, leave, enter)
            state["pivots"] += 1
            state["since_refresh"] += 1
            if state["pivots"] > max_pivots:
                raise SolverError("simplex pivot limit exceeded")
            if state["since_refresh"] >= REFRESH_PIVOTS:
                refactorize()
            obj = float(cost[basis] @ tableau[:, -1])
            if obj < last_obj - PIVOT_TOL * max(1.0, abs(last_obj)):
                stall = 0
                last_obj = obj
            else:
                stall += 1
                if stall >= STALL_LIMIT:
                    bland = True

    if need_art:
        cost1 = np.zeros(n_all)
        cost1[n_real:] = 1.0
        run_phase(cost1, n_all)
        refactorize()
        resid = float(cost1[basis] @ tableau[:, -1])
        if resid > FEAS_TOL:
            raise SolverError("linear program is infeasible")
        # Pivot leftover artificials down to real columns where possible;
        # any that remain sit basic at zero and are barred from moving.
        for i in range(m):
            if basis[i] < n_real:
                continue
            row = tableau[i, :n_real]
            j = int(np.argmax(np.abs(row)))
            if abs(row[j]) > 1e-7:
                _pivot(tableau, basis, i, j)
                state["pivots"] += 1
        refactorize()

    cost2 = np.concatenate([c, np.zeros(n_all - nx)])
    run_phase(cost2, n_real)

    # Extract against the original right-hand side: pricing never touched
    # b, so the final basis is optimal for the unperturbed problem as long
    # as it stays feasible there.
    try:
        xb = np.linalg.solve(astd[:, basis], b) if m else np.zeros(0)
    except np.linalg.LinAlgError:
        raise SolverError("simplex basis became singular")
    b_scale = max(1.0, float(np.abs(b).max())) if m else 1.0
    if m and float(xb.min()) < -FEAS_TOL * b_scale:
        raise SolverError("simplex finished at an infeasible point")
    x_std = np.zeros(n_all)
    x_std[basis] = np.maximum(xb, 0.0)
    objective = float(cost2 @ x_std)

    # Duals from the final basis columns of the standard form.
    try:
        y = np.linalg.solve(astd[:, basis].T, cost2[basis])
    except np.linalg.LinAlgError:
        y, *_ = np.linalg.lstsq(astd[:, basis].T, cost2[basis], rcond=None)
    y = y * sign  # restore the caller's row orientation
    return SimplexResult(
        x=x_std[:nx],
        objective=objective,
        duals_ub=y[:m_ub],
        duals_eq=y[m_ub:],
        pivots=state["pivots"],
    )


def _pivot(tableau, basis, leave, enter):
    piv = tableau[leave, enter]
    tableau[leave] /= piv
    col = tableau[:, enter].copy()
    col[leave] = 0.0
    tableau -= np.outer(col, tableau[leave])
    basis[leave] = enter
