"""Operator-splitting solver for the adversarial metric game.

Solves  min_{Q in Delta}  f(A Q B + Q C + D) + <Q, E> + c00  by ADMM on the
split  min f(Z) + <Q, E> + indicator(Q in Delta)  s.t.  Z = A X B + X C + D,
Q = X.  All update steps are closed-form:

  Q: projection onto Delta of X + W - E / rho
  Z: prox of the sum-of-k-largest envelope, a single Delta projection
  X: a Sylvester-type linear solve A X Bt + X = Ft whose eigendecompositions
     depend only on the metric and batch size, so they are computed once and
     reused across all batches and training steps
  U, W: dual ascent on the two couplings

The rank-one structure of A = ones * ones^T gives its eigendecomposition in
closed form through a Householder reflector, and Bt is symmetrized by a
congruence with (C C^T + I)^{+-1/2} so a single symmetric eigensolve covers
the rest.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import (
    GameConstants,
    game_constants,
    sum_k_largest_envelope,
    z_of_q,
)
from .grids import CompiledMetric
from .projection import ProjectionState, project_delta, project_delta_state
from .simplex import SolverError

DEFAULT_RHO = 1.0
DEFAULT_ITERS = 100
SINGULAR_TOL = 1e-12

# Incremented on every eigendecomposition build; lets callers observe that
# cached assemblies do no spectral work.
EIG_BUILD_COUNT = 0


@dataclass(frozen=True)
class AdmmCache:
    """Spectral factorizations reused across solves of one (metric, n)."""

    gc: GameConstants
    house: np.ndarray       # symmetric orthogonal H with H A H = diag(s_diag)
    s_diag: np.ndarray      # eigenvalues of A: [n, 0, ..., 0]
    v: np.ndarray           # A X Bt + X = Ft diagonalizes as Bt = V T V^-1
    v_inv: np.ndarray
    t_diag: np.ndarray
    cct_inv: np.ndarray     # (C C^T + I)^{-1}
    denom: np.ndarray       # s_diag[i] * t_diag[j] + 1


@dataclass
class AdmmWorkspace:
    cache: AdmmCache
    psi: np.ndarray
    rho: float
    e: np.ndarray  # E = E0 - psi 1^T
    q: np.ndarray
    z: np.ndarray
    x: np.ndarray
    u: np.ndarray
    w: np.ndarray
    # Projection warm starts from the previous iteration; results do not
    # depend on them.
    proj_q: ProjectionState | None = None
    proj_z: ProjectionState | None = None

    @property
    def n(self) -> int:
        return self.cache.gc.n


@dataclass
class AdmmResult:
    q: np.ndarray
    objective: float
    iterations: int
    residual_z: float
    residual_q: float
    converged: bool


def build_cache(cm: CompiledMetric) -> AdmmCache:
    """Eigendecompositions for one metric at one batch size."""
    global EIG_BUILD_COUNT
    EIG_BUILD_COUNT += 1
    gc = game_constants(cm)
    n = gc.n

    # A = ones ones^T = H diag(n, 0, ..., 0) H with H a Householder
    # reflector mapping e1 to ones / sqrt(n).
    e1 = np.zeros(n)
    e1[0] = 1.0
    u = np.full(n, 1.0 / np.sqrt(n))
    w = e1 - u
    nw = w @ w
    if nw < 1e-30:
        house = np.eye(n)
    else:
        house = np.eye(n) - 2.0 * np.outer(w, w) / nw
    s_diag = np.zeros(n)
    s_diag[0] = float(n)

    cct = gc.c @ gc.c.T + np.eye(n)
    wc, ec = np.linalg.eigh(cct)
    cct_inv = (ec / wc) @ ec.T
    half = (ec * np.sqrt(1.0 / wc)) @ ec.T       # (C C^T + I)^{-1/2}
    half_inv = (ec * np.sqrt(wc)) @ ec.T

    bbar = float(n) * (gc.b @ gc.b.T) + gc.c @ gc.b.T + gc.b @ gc.c.T
    msym = half @ bbar @ half
    msym = 0.5 * (msym + msym.T)
    t_diag, wm = np.linalg.eigh(msym)
    v = half_inv @ wm
    v_inv = wm.T @ half

    denom = s_diag[:, None] * t_diag[None, :] + 1.0
    for arr in (house, s_diag, v, v_inv, t_diag, cct_inv, denom):
        arr.setflags(write=False)
    return AdmmCache(
        gc=gc, house=house, s_diag=s_diag, v=v, v_inv=v_inv,
        t_diag=t_diag, cct_inv=cct_inv, denom=denom,
    )


def assemble(
    cm: CompiledMetric,
    psi: np.ndarray,
    rho: float = DEFAULT_RHO,
    cache: AdmmCache | None = None,
) -> AdmmWorkspace:
    """Workspace for one solve; pass a cache to skip the spectral work."""
    if cm.has_constraints:
        raise SolverError(
            "metrics with constraints must use the LP route"
        )
    if cache is None:
        cache = build_cache(cm)
    n = cache.gc.n
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (n,):
        raise ValueError(f"potentials must have shape ({n},)")
    zeros = np.zeros((n, n))
    return AdmmWorkspace(
        cache=cache,
        psi=psi,
        rho=float(rho),
        e=cache.gc.e0 - psi[:, None],
        q=zeros.copy(),
        z=zeros.copy(),
        x=zeros.copy(),
        u=zeros.copy(),
        w=zeros.copy(),
    )


def solve_sylvester(cache: AdmmCache, f: np.ndarray) -> np.ndarray:
    """Solve A X Bt + X = -F (C C^T + I)^{-1} via the cached spectra."""
    ft = -f @ cache.cct_inv
    if np.any(np.abs(cache.denom) < SINGULAR_TOL):
        raise SolverError(
            "X update is numerically singular for this metric and batch size"
        )
    g = cache.house @ ft @ cache.v
    x_diag = g / cache.denom
    return cache.house @ x_diag @ cache.v_inv


def prox_envelope(x: np.ndarray, rho: float) -> np.ndarray:
    """Prox of the sum-of-k-largest envelope f with step 1/rho.

    f is the support function of Delta, so by Moreau decomposition the prox
    is x minus a scaled projection onto Delta.
    """
    return x - project_delta(rho * x) / rho


def solve(
    ws: AdmmWorkspace,
    max_iters: int = DEFAULT_ITERS,
    tol: float | None = None,
) -> AdmmResult:
    """Run ADMM iterations on the workspace (resumable: state persists).

    With tol=None runs exactly max_iters iterations and reports the final
    marginal.  With a tolerance, stops as soon as both primal residuals
    drop below it; because every Q iterate is feasible but the objective
    along the trajectory is not monotone, this mode reports the best
    marginal visited rather than the last one.
    """
    gc = ws.cache.gc
    it = 0
    res_z = np.inf
    res_q = np.inf
    rho = ws.rho
    best_obj = np.inf
    best_q = None
    for it in range(1, max_iters + 1):
        ws.q, ws.proj_q = project_delta_state(
            ws.x + ws.w - ws.e / rho, ws.proj_q
        )
        v = z_of_q(gc, ws.x) + ws.u
        pz, ws.proj_z = project_delta_state(rho * v, ws.proj_z)
        ws.z = v - pz / rho
        m = gc.d - ws.z + ws.u
        f = (
            np.outer(np.ones(ws.n), gc.b @ m.sum(axis=0))
            + m @ gc.c.T
            + ws.w
            - ws.q
        )
        ws.x = solve_sylvester(ws.cache, f)
        zx = z_of_q(gc, ws.x)
        ws.u = ws.u + zx - ws.z
        ws.w = ws.w + ws.x - ws.q
        if not (np.isfinite(ws.x).all() and np.isfinite(ws.u).all()):
            raise SolverError(f"game solver diverged at iteration {it}")
        if tol is not None:
            obj_t = (
                sum_k_largest_envelope(z_of_q(gc, ws.q))
                + float(np.sum(ws.q * ws.e))
                + gc.c00
            )
            if obj_t < best_obj:
                best_obj = obj_t
                best_q = ws.q
            res_z = float(np.linalg.norm(zx - ws.z))
            res_q = float(np.linalg.norm(ws.x - ws.q))
            if res_z <= tol and res_q <= tol:
                break
    if tol is not None and best_q is not None:
        q_out = best_q
        objective = best_obj
    else:
        q_out = ws.q
        zx = z_of_q(gc, ws.x)
        res_z = float(np.linalg.norm(zx - ws.z))
        res_q = float(np.linalg.norm(ws.x - ws.q))
        objective = (
            sum_k_largest_envelope(z_of_q(gc, q_out))
            + float(np.sum(q_out * ws.e))
            + gc.c00
        )
    converged = tol is not None and res_z <= tol and res_q <= tol
    return AdmmResult(
        q=q_out,
        objective=objective,
        iterations=it,
        residual_z=res_z,
        residual_q=res_q,
        converged=bool(converged),
    )
