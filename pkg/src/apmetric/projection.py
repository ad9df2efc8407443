"""Euclidean projection onto the marginal polytope Delta.

Dualizing the single budget constraint sum_k colsum_k / k <= 1 with a
multiplier eta >= 0 decouples the problem over columns.  Each column solves

    min_p  0.5 * ||p - a||^2 + (eta / k) * sum(p)
    s.t.   0 <= p_i <= (1/k) * sum(p)

whose KKT solution, after sorting the column once (the eta shift is uniform
within a column, so the order never changes), is piecewise: the t largest
entries sit at a common cap r, a middle block of m entries is free at value
a_i - eta/k + delta, and the rest are zero.  For a candidate split (t, m)
the pair (r, delta) solves a 2x2 linear system in prefix sums:

    t * r + (k - t) * delta = sum of the t largest shifted entries
    (k - t) * r - m * delta = sum of the m middle shifted entries

and any split passing the KKT sign checks is the unique column solution.
The outer problem root-finds the budget sum_k r_k = 1 over eta >= 0.  The
budget is piecewise affine and nonincreasing in eta and each piece's exact
slope falls out of the same 2x2 systems, so safeguarded Newton steps land
on the root to float precision once the active piece is found.

Two interchangeable column solvers are provided: a numba kernel scanning
candidate splits in preference order with early exit (the default; this
projection sits inside the inner loop of the game solver), and a vectorized
numpy screen of all splits at once, kept as a fallback and cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        return wrap if not (args and callable(args[0])) else args[0]


FEAS_TOL = 1e-11
BUDGET_TOL = 1e-9
MAX_BUDGET_EVALS = 60

_GRID_CACHE: dict[int, tuple[np.ndarray, ...]] = {}


# ---------------------------------------------------------------------------
# Fast path: per-column scan with early exit.


@njit(cache=True, inline="always")
def _eval_split(sc_row, prefix_row, k, shift, t, m):
    """Stationary (r, delta) and KKT margin of one candidate split."""
    tf = float(t)
    mf = float(m)
    s_t = prefix_row[t] - tf * shift
    s_free = prefix_row[t + m] - prefix_row[t] - mf * shift
    det = -(tf * mf) - (k - tf) ** 2
    if det == 0.0:
        r = s_t / k
        delta = r - (sc_row[t - 1] - shift)
        if delta < 0.0:
            delta = 0.0
    else:
        r = (-mf * s_t - (k - tf) * s_free) / det
        delta = (-(k - tf) * s_t + tf * s_free) / det
    margin = r if r < delta else delta
    if t > 0:
        v = (sc_row[t - 1] - shift) + delta - r
        if v < margin:
            margin = v
    if m > 0:
        v = r - ((sc_row[t] - shift) + delta)
        if v < margin:
            margin = v
        v = (sc_row[t + m - 1] - shift) + delta
        if v < margin:
            margin = v
    if t + m < sc_row.shape[0]:
        v = -((sc_row[t + m] - shift) + delta)
        if v < margin:
            margin = v
    return r, delta, margin


@njit(cache=True)
def _column_split(sc_row, prefix_row, k, eta, tol, n, t0, m0):
    """KKT split of one sorted column at fixed eta.

    First probes the warm-start split (t0, m0) and its immediate
    neighbours (splits move slowly between nearby eta values), then falls
    back to scanning candidates by (capped count asc, zero count asc) and
    returns the first feasible one, or the nearest-to-feasible split if
    float noise starves the column.
    """
    shift = eta / k
    if t0 >= 0:
        for dt in (0, -1, 1):
            tc = t0 + dt
            if tc < 0 or tc > n:
                continue
            for dm in (0, -1, 1):
                mc = m0 + dm
                if mc < 0 or tc + mc > n:
                    continue
                r, delta, margin = _eval_split(
                    sc_row, prefix_row, k, shift, tc, mc
                )
                if margin >= -tol:
                    return r, tc, mc, delta
    best_margin = -1e300
    br = 0.0
    bt = 0
    bm = 0
    bd = 0.0
    for t in range(n + 1):
        for z in range(n - t + 1):
            m = n - t - z
            r, delta, margin = _eval_split(sc_row, prefix_row, k, shift, t, m)
            if margin >= -tol:
                return r, t, m, delta
            if margin > best_margin:
                best_margin = margin
                br = r
                bt = t
                bm = m
                bd = delta
    return br, bt, bm, bd


@njit(cache=True)
def _solve_all(sc, prefix, ks, tols, eta, r, t, m, d):
    """Solve every column at fixed eta; t and m double as in/out warm starts
    (pass -1 entries for a cold scan).

    Returns the budget sum_j r_j and its exact slope d(budget)/d(eta) on
    the current affine piece (each split's r is affine in eta while the
    split pattern holds).
    """
    n = sc.shape[0]
    budget = 0.0
    slope = 0.0
    for j in range(n):
        k = ks[j]
        rj, tj, mj, dj = _column_split(
            sc[j], prefix[j], k, eta, tols[j], n, t[j], m[j]
        )
        if rj < 0.0:
            rj = 0.0
        elif rj > 0.0:
            tf = float(tj)
            mf = float(mj)
            det = -(tf * mf) - (k - tf) ** 2
            if det == 0.0:
                slope -= tf / (k * k)
            else:
                slope += mf / det
        r[j] = rj
        t[j] = tj
        m[j] = mj
        d[j] = dj
        budget += rj
    return budget, slope


@njit(cache=True)
def _bisect(sc, prefix, ks, tols, hi0, hint, t, m):
    """Root-find the budget multiplier; returns the final split arrays.

    The budget is piecewise affine and nonincreasing in eta with the exact
    slope of the active piece available, so a Newton step from any point on
    the root's piece lands on the root; a bracket with midpoint fallback
    guards the piece changes.  A positive hint (the multiplier from a
    nearby projection) plus the t/m split warm starts bring the steady
    state down to two cheap evaluations.
    """
    n = sc.shape[0]
    r = np.empty(n)
    d = np.empty(n)
    evals = 0
    lo = 0.0      # highest eta seen with budget > 1 (0 = assumed, unseen)
    hi = -1.0     # lowest eta seen with budget <= 1 (-1 = none yet)
    eta = hint if hint > 0.0 else 0.0
    while evals < MAX_BUDGET_EVALS:
        b, slope = _solve_all(sc, prefix, ks, tols, eta, r, t, m, d)
        evals += 1
        if -BUDGET_TOL <= b - 1.0 <= 1e-12:
            return eta, r, t, m, d
        if b > 1.0:
            lo = eta
        else:
            if eta == 0.0:
                # No multiplier needed: the unconstrained budget fits.
                return 0.0, r, t, m, d
            hi = eta
        cand = -1.0
        if slope < 0.0:
            cand = eta + (1.0 - b) / slope
        if hi >= 0.0:
            if not (lo < cand < hi):
                cand = 0.5 * (lo + hi)
        elif not (cand > lo):
            cand = 2.0 * lo if lo > 0.0 else hi0
        eta = cand
    if hi < 0.0:
        hi = eta
    b, slope = _solve_all(sc, prefix, ks, tols, hi, r, t, m, d)
    return hi, r, t, m, d


# ---------------------------------------------------------------------------
# Reference path: vectorized screen of every split of every column at once.


def _grids(n: int):
    got = _GRID_CACHE.get(n)
    if got is None:
        t = np.arange(n + 1).reshape(-1, 1, 1)
        m = np.arange(n + 1).reshape(1, -1, 1)
        z = n - t - m
        invalid = z < 0
        # Deterministic preference: fewest capped entries, then fewest zeros.
        rank = np.where(invalid, 2 * (n + 1) ** 2, t * (n + 1) + z)
        got = (t, m, z, invalid, rank.reshape(-1, 1))
        _GRID_CACHE[n] = got
    return got


def _screen_columns(sa, prefix, pad, ks, eta, tol):
    n, ncol = sa.shape
    t, m, z, invalid, rank = _grids(n)
    t2 = t[:, :, 0]
    tm2 = np.minimum(t2 + m[:, :, 0], n)

    shift = eta / ks
    s_t = prefix[:, None, :] - t * shift
    s_free = (prefix[tm2] - prefix[:, None, :]) - m * shift

    k = ks.reshape(1, 1, -1)
    tf = t.astype(float)
    mf = m.astype(float)
    det = -(tf * mf) - (k - tf) ** 2
    degen = det == 0.0
    safe = np.where(degen, 1.0, det)
    r = (-mf * s_t - (k - tf) * s_free) / safe
    delta = (-(k - tf) * s_t + tf * s_free) / safe

    # pad[j + 1] = sa[j] with +/- inf sentinels standing in for the missing
    # neighbours of the extreme splits.
    cap_min = pad[t2] - shift
    free_max = pad[t2 + 1] - shift
    free_min = pad[tm2] - shift
    zero_max = pad[tm2 + 1] - shift

    r_deg = s_t / k
    d_deg = np.maximum(0.0, r_deg - cap_min)
    r = np.where(degen, r_deg, r)
    delta = np.where(degen, d_deg, delta)

    inf = np.inf
    comp = np.minimum(r, delta)
    comp = np.minimum(comp, np.where(t > 0, cap_min + delta - r, inf))
    comp = np.minimum(comp, np.where(m > 0, r - (free_max + delta), inf))
    comp = np.minimum(comp, np.where(m > 0, free_min + delta, inf))
    comp = np.minimum(comp, np.where(z > 0, -(zero_max + delta), inf))
    margin = np.where(invalid, -inf, comp).reshape(-1, ncol)

    big = 2 * (n + 1) ** 2
    ranked = np.where(margin >= -tol[None, :], rank, big)
    cols = np.arange(ncol)
    sel = np.argmin(ranked, axis=0)
    starved = ranked[sel, cols] >= big
    if np.any(starved):
        sel = np.where(starved, np.argmax(margin, axis=0), sel)

    def flat(x):
        return np.broadcast_to(x, (n + 1, n + 1, ncol)).reshape(-1, ncol)

    r_sel = np.maximum(flat(r)[sel, cols], 0.0)
    d_sel = flat(delta)[sel, cols]
    t_sel = np.broadcast_to(t2, (n + 1, n + 1)).reshape(-1)[sel]
    m_sel = np.broadcast_to(m[:, :, 0], (n + 1, n + 1)).reshape(-1)[sel]
    return r_sel, t_sel, m_sel, d_sel


def _bisect_screen(sa, prefix, pad, ks, tols, hi0):
    def solve_at(eta):
        sol = _screen_columns(sa, prefix, pad, ks, eta, tols)
        return float(sol[0].sum()), sol

    b_lo, sol_lo = solve_at(0.0)
    if b_lo <= 1.0 + 1e-12:
        return 0.0, sol_lo
    lo = 0.0
    evals = 1

    hi = hi0
    b_hi, sol_hi = solve_at(hi)
    evals += 1
    while b_hi > 1.0 and evals < MAX_BUDGET_EVALS:
        lo, b_lo, sol_lo = hi, b_hi, sol_hi
        hi *= 2.0
        b_hi, sol_hi = solve_at(hi)
        evals += 1

    while evals < MAX_BUDGET_EVALS:
        eta = None
        if (
            b_lo > b_hi
            and np.array_equal(sol_lo[1], sol_hi[1])
            and np.array_equal(sol_lo[2], sol_hi[2])
        ):
            eta = lo + (b_lo - 1.0) * (hi - lo) / (b_lo - b_hi)
            if not lo < eta < hi:
                eta = None
        if eta is None:
            eta = 0.5 * (lo + hi)
        b_mid, sol_mid = solve_at(eta)
        evals += 1
        if -BUDGET_TOL <= b_mid - 1.0 <= 1e-12:
            return eta, sol_mid
        if b_mid > 1.0:
            lo, b_lo, sol_lo = eta, b_mid, sol_mid
        else:
            hi, b_hi, sol_hi = eta, b_mid, sol_mid
    return hi, sol_hi


# ---------------------------------------------------------------------------
# Public entry points.


def _rebuild(sa, order, ks, eta, sol):
    """Assemble the projected matrix from per-column block solutions."""
    r, t, m, delta = sol
    n = sa.shape[0]
    shift = eta / ks
    idx = np.arange(n).reshape(-1, 1)
    capped = idx < t[None, :]
    free = (idx >= t[None, :]) & (idx < (t + m)[None, :])
    vals = np.clip(sa - shift[None, :] + delta[None, :], 0.0, r[None, :])
    sorted_p = np.where(capped, r[None, :], np.where(free, vals, 0.0))
    p = np.empty_like(sorted_p)
    np.put_along_axis(p, order, sorted_p, axis=0)
    return p


def _prepare(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("input must be a square matrix")
    n = a.shape[0]
    ks = np.arange(1, n + 1, dtype=float)
    tols = FEAS_TOL * np.maximum(1.0, np.abs(a).max(axis=0))
    order = np.argsort(-a, axis=0, kind="stable")
    sa = np.take_along_axis(a, order, axis=0)
    prefix = np.vstack([np.zeros((1, n)), np.cumsum(sa, axis=0)])
    hi0 = max(1e-12, float((ks * np.maximum(0.0, a.max(axis=0))).max()))
    return a, n, ks, tols, order, sa, prefix, hi0


@dataclass
class ProjectionState:
    """Warm-start carrier for repeated projections of a drifting matrix.

    Holds the budget multiplier and per-column split sizes from the last
    call.  Results never depend on the carried state; it only shortcuts
    the multiplier bracket and the per-column candidate scans.
    """

    eta: float
    t: np.ndarray
    m: np.ndarray


def project_delta(a: np.ndarray) -> np.ndarray:
    """Project a square matrix onto Delta in Frobenius norm.

    The result satisfies the polytope inequalities to well within 1e-10 and
    matches a high-accuracy QP reference far tighter than 1e-6.
    """
    return project_delta_state(a)[0]


def project_delta_state(
    a: np.ndarray, state: ProjectionState | None = None
) -> tuple[np.ndarray, ProjectionState]:
    """Projection plus warm-start state for iterative callers.

    Callers that project a slowly moving matrix can pass the state from the
    previous call back in to skip most of the search; the projection is the
    same either way.
    """
    a, n, ks, tols, order, sa, prefix, hi0 = _prepare(a)
    if not _HAVE_NUMBA:
        pad = np.vstack([np.full((1, n), np.inf), sa, np.full((1, n), -np.inf)])
        eta, sol = _bisect_screen(sa, prefix, pad, ks, tols, hi0)
        st = ProjectionState(
            float(eta),
            np.asarray(sol[1], np.int64).copy(),
            np.asarray(sol[2], np.int64).copy(),
        )
        return _rebuild(sa, order, ks, eta, sol), st
    sc = np.ascontiguousarray(sa.T)
    pc = np.ascontiguousarray(prefix.T)
    if state is not None and state.t.shape[0] == n:
        hint = float(state.eta)
        t = state.t.copy()
        m = state.m.copy()
    else:
        hint = 0.0
        t = np.full(n, -1, np.int64)
        m = np.full(n, -1, np.int64)
    eta, r, t, m, d = _bisect(sc, pc, ks, tols, hi0, hint, t, m)
    p = _rebuild(sa, order, ks, eta, (r, t, m, d))
    return p, ProjectionState(float(eta), t, m)


def project_delta_reference(a: np.ndarray) -> np.ndarray:
    """Same projection via the all-candidates numpy screen (cross-check)."""
    a, n, ks, tols, order, sa, prefix, hi0 = _prepare(a)
    pad = np.vstack([np.full((1, n), np.inf), sa, np.full((1, n), -np.inf)])
    eta, sol = _bisect_screen(sa, prefix, pad, ks, tols, hi0)
    return _rebuild(sa, order, ks, eta, sol)
