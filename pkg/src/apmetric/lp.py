"""Exact linear-programming route for the adversarial metric game.

The game  min_{Q in Delta} max_{P in Delta, constraints}  <P, Z(Q)> + c(Q)
collapses to one LP by dualizing the inner maximization.  Variables, all
nonnegative:

    a[i,k]    scaled label marginal, Q[i,k] = k * a[i,k]
    alpha[i,k] multipliers of the within-column coupling of the inner player
    beta[l]    multipliers of the l-th metric constraint (if any)
    v          value of the inner maximization envelope

minimize   v + sum_{i,k} k * (E0 - psi 1^T)[i,k] * a[i,k]
             + sum_l beta[l] * (mu_l - tau_l)          (+ c00, added after)
subject to, for every (i, k):
    k * Z(Q)[i,k] + sum_l beta[l] * k * B_l[i,k]
        - alpha[i,k] + (1/k) * sum_j alpha[j,k] - v  <=  0
and the Delta polytope of Q written in the a variables.

The duals of the envelope rows recover the inner player's optimum:
P*[i,k] = k * lambda[i,k], which is how constrained solutions report a
witness prediction marginal.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .assembly import GameConstants, game_constants
from .grids import CompiledMetric, ConstraintLinearForm
from .simplex import SimplexResult, simplex_solve

Q_CLIP = 1e-11


@dataclass
class LpProblem:
    n: int
    n_constraints: int
    c: np.ndarray
    a_ub: np.ndarray
    b_ub: np.ndarray
    constant: float
    gc: GameConstants

    @property
    def n_vars(self) -> int:
        return 2 * self.n ** 2 + self.n_constraints + 1

    def a_index(self, i: int, k: int) -> int:
        """Column of a[i,k]; i is 0-based, k is the positive count 1..n."""
        return i * self.n + (k - 1)

    def alpha_index(self, i: int, k: int) -> int:
        return self.n ** 2 + i * self.n + (k - 1)

    def beta_index(self, l: int) -> int:
        return 2 * self.n ** 2 + l

    @property
    def v_index(self) -> int:
        return 2 * self.n ** 2 + self.n_constraints


@dataclass
class GameSolution:
    value: float
    q: np.ndarray
    p_witness: np.ndarray | None
    pivots: int
    beta: np.ndarray = field(default_factory=lambda: np.zeros(0))


def build_lp(
    cm: CompiledMetric,
    psi: np.ndarray,
    forms: tuple[ConstraintLinearForm, ...] = (),
) -> LpProblem:
    """Assemble the game LP for one batch of potentials."""
    n = cm.n
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (n,):
        raise ValueError(f"potentials must have shape ({n},)")
    gc = game_constants(cm)
    t = len(forms)
    nv = 2 * n * n + t + 1
    ks = np.arange(1, n + 1, dtype=float)

    lp = LpProblem(
        n=n, n_constraints=t,
        c=np.zeros(nv),
        a_ub=np.zeros((2 * n * n + 1, nv)),
        b_ub=np.zeros(2 * n * n + 1),
        constant=gc.c00,
        gc=gc,
    )

    # Objective: <Q, E0 - psi 1^T> in a variables, the beta offsets, and v.
    e_eff = gc.e0 - psi[:, None]
    lp.c[: n * n] = (e_eff * ks[None, :]).reshape(-1)
    for l, form in enumerate(forms):
        lp.c[lp.beta_index(l)] = form.mu - form.tau
    lp.c[lp.v_index] = 1.0

    # Envelope rows, one per (i, k).
    row = 0
    bmat = gc.b
    cmat = gc.c
    for i in range(n):
        for k in range(1, n + 1):
            r = lp.a_ub[row]
            # coefficient of a[x, y] inside (A Q B + Q C)[i, k], using
            # Q[x, y] = (y + 1) * a[x, y]:
            #   (A Q B)[i,k] = sum_{x,y} Q[x,y] * B[y, k-1]
            #   (Q C)[i,k]   = sum_y Q[i,y] * C[y, k-1]
            coef = (ks * bmat[:, k - 1])[None, :].repeat(n, axis=0)
            coef[i, :] += ks * cmat[:, k - 1]
            r[: n * n] = (k * coef).reshape(-1)
            r[lp.alpha_index(i, k)] -= 1.0
            for j in range(n):
                r[lp.alpha_index(j, k)] += 1.0 / k
            for l, form in enumerate(forms):
                r[lp.beta_index(l)] = k * form.b_matrix[i, k - 1]
            r[lp.v_index] = -1.0
            lp.b_ub[row] = -k * gc.d[i, k - 1]
            row += 1

    # Delta membership of Q in the a variables.
    for i in range(n):
        for k in range(1, n + 1):
            r = lp.a_ub[row]
            r[lp.a_index(i, k)] += 1.0
            for j in range(n):
                r[lp.a_index(j, k)] -= 1.0 / k
            row += 1
    lp.a_ub[row, : n * n] = 1.0
    lp.b_ub[row] = 1.0
    return lp


def solve_lp(lp: LpProblem) -> tuple[SimplexResult, np.ndarray, np.ndarray]:
    """Run the simplex and unpack (result, Q*, envelope-row duals)."""
    res = simplex_solve(lp.c, a_ub=lp.a_ub, b_ub=lp.b_ub)
    n = lp.n
    ks = np.arange(1, n + 1, dtype=float)
    a_star = res.x[: n * n].reshape(n, n)
    q = np.clip(a_star * ks[None, :], 0.0, None)
    q[q < Q_CLIP] = 0.0
    lam = np.maximum(-res.duals_ub[: n * n], 0.0)
    return res, q, lam


def game_value_and_q(
    cm: CompiledMetric,
    psi: np.ndarray,
    forms: tuple[ConstraintLinearForm, ...] = (),
) -> GameSolution:
    """Exact game value, adversarial label marginal, and inner witness."""
    lp = build_lp(cm, psi, forms)
    res, q, lam = solve_lp(lp)
    n = lp.n
    ks = np.arange(1, n + 1, dtype=float)
    p_witness = np.clip(lam.reshape(n, n) * ks[None, :], 0.0, None)
    beta = np.array([res.x[lp.beta_index(l)] for l in range(lp.n_constraints)])
    return GameSolution(
        value=res.objective + lp.constant,
        q=q,
        p_witness=p_witness,
        pivots=res.pivots,
        beta=beta,
    )


def lp_to_text(lp: LpProblem) -> str:
    """Plain-text rendering of the LP (one line per row), for --dump-lp."""
    n, t = lp.n, lp.n_constraints
    names = []
    for i in range(n):
        for k in range(1, n + 1):
            names.append(f"a[{i},{k}]")
    for i in range(n):
        for k in range(1, n + 1):
            names.append(f"alpha[{i},{k}]")
    for l in range(t):
        names.append(f"beta[{l + 1}]")
    names.append("v")

    def terms(coefs):
        out = []
        for j, cj in enumerate(coefs):
            if abs(cj) > 1e-12:
                out.append(f"{cj:+.12g} {names[j]}")
        return " ".join(out) if out else "0"

    lines = [
        f"minimize {terms(lp.c)} {lp.constant:+.12g}",
        "subject to (all variables >= 0)",
    ]
    for r in range(lp.a_ub.shape[0]):
        lines.append(f"  r{r}: {terms(lp.a_ub[r])} <= {lp.b_ub[r]:.12g}")
    return "\n".join(lines) + "\n"
