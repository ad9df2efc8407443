"""Constant matrices of the marginal game for one compiled metric.

With Dk = diag(1, 1/2, ..., 1/n), the expected metric between prediction
marginal P and label marginal Q is the bilinear form

    expected_metric(P, Q) = <P, A Q B + Q C + D> + <Q, E0> + c00

where A = ones((n, n)) and B, C, D, E0, c00 collect the compiled slope and
intercept grids.  The inner maximization over P in Delta of this form is

    f(X) = max(0, max_k sum-of-k-largest(X[:, k-1]))       at X = A Q B + Q C + D,

so the adversarial game value at potentials psi is

    min_{Q in Delta}  f(A Q B + Q C + D) + <Q, E0 - psi 1^T> + c00.

All four regimes use the same formulas: the special-case corners enter
through c00 and the zeroed boundary rows/columns of the grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import CompiledMetric


@dataclass(frozen=True)
class GameConstants:
    n: int
    b: np.ndarray  # (n, n)
    c: np.ndarray  # (n, n)
    d: np.ndarray  # (n, n)
    e0: np.ndarray  # (n, n), psi-independent part of E
    c00: float


def game_constants(cm: CompiledMetric) -> GameConstants:
    n = cm.n
    dk = 1.0 / np.arange(1, n + 1, dtype=float)  # diagonal of Dk
    ones = np.ones((n, n))

    m1 = cm.slope[1:, 1:].copy()
    m5 = cm.inter[1:, 1:].copy()
    if cm.neg_special:
        # The all-ones corner term prob_full(P) * prob_full(Q) equals
        # r_n * s_n, which lives at the (n, n) intercept slot.
        m5[n - 1, n - 1] += 1.0

    if cm.pos_special:
        c00 = 1.0
        row0 = np.zeros(n)
        col0 = np.zeros(n)
    else:
        c00 = float(cm.inter[0, 0])
        row0 = cm.inter[0, 1:].copy()
        col0 = cm.inter[1:, 0].copy()

    # <P, A Q B> carries the intercept block through the count marginals,
    # <P, Q C> the slope block, and D / E0 the boundary pieces that survive
    # when one side predicts the all-zeros vector.
    b = (dk[:, None] * m5.T * dk[None, :]
         + c00 * np.outer(dk, dk)
         - np.outer(dk * row0, dk)
         - np.outer(dk, dk * col0))
    c = m1.T
    d = -c00 * ones * dk[None, :] + np.outer(np.ones(n), dk * col0)
    e0 = np.outer(np.ones(n), dk * row0) - c00 * ones * dk[None, :]

    for arr in (b, c, d, e0):
        arr.setflags(write=False)
    return GameConstants(n=n, b=b, c=c, d=d, e0=e0, c00=c00)


def z_of_q(gc: GameConstants, q: np.ndarray) -> np.ndarray:
    """A Q B + Q C + D with A the all-ones matrix."""
    colsum = q.sum(axis=0)
    return np.outer(np.ones(gc.n), colsum @ gc.b) + q @ gc.c + gc.d


def bilinear_expected(gc: GameConstants, p: np.ndarray, q: np.ndarray) -> float:
    """Expected metric via the game constants (cross-check of the grids path)."""
    return float(np.sum(p * z_of_q(gc, q)) + np.sum(q * gc.e0) + gc.c00)


def sum_k_largest_envelope(x: np.ndarray) -> float:
    """f(X) = max(0, max_k sum-of-k-largest(X[:, k-1])).

    Equals the support function of Delta at X: the inner adversary either
    abstains (value 0) or concentrates on some positive-count k.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    best = 0.0
    srt = -np.sort(-x, axis=0)
    csum = np.cumsum(srt, axis=0)
    for k in range(1, n + 1):
        best = max(best, float(csum[k - 1, k - 1]))
    return best


def game_objective(gc: GameConstants, psi: np.ndarray, q: np.ndarray) -> float:
    """Objective of the outer minimization at label marginal Q."""
    e = gc.e0 - np.outer(psi, np.ones(gc.n))
    return sum_k_largest_envelope(z_of_q(gc, q)) + float(np.sum(q * e)) + gc.c00
