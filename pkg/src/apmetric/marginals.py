"""Marginal representations of distributions over binary label vectors.

A distribution over {0,1}^n is summarized by the n x n matrix P with
P[i, k-1] = Prob(y_i = 1 and sum(y) = k).  The set of matrices that arise
this way is the polytope Delta:

    P >= 0
    P[i, k-1] <= (1/k) * sum_j P[j, k-1]
    sum_k (1/k) * sum_j P[j, k-1] <= 1

Column k / k is the probability r_k of drawing a vector with exactly k ones;
the leftover 1 - sum_k r_k is the probability of the all-zeros vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grids import CompiledMetric, ConstraintLinearForm

DELTA_TOL = 1e-10


@dataclass(frozen=True)
class DerivedStats:
    """Quantities derived from a marginal matrix."""

    r: np.ndarray  # r[k-1] = Prob(sum(y) = k), k = 1..n
    prob_empty: float  # Prob(y = all zeros)
    prob_full: float  # Prob(y = all ones)
    comp: np.ndarray  # comp[i, k-1] = Prob(y_i = 0 and sum(y) = k)


def derived_stats(p: np.ndarray) -> DerivedStats:
    p = np.asarray(p, dtype=float)
    n = p.shape[0]
    ks = np.arange(1, n + 1, dtype=float)
    r = p.sum(axis=0) / ks
    comp = r[None, :] - p
    return DerivedStats(
        r=r,
        prob_empty=float(1.0 - r.sum()),
        prob_full=float(r[-1]),
        comp=comp,
    )


def is_in_delta(p: np.ndarray, tol: float = DELTA_TOL) -> bool:
    """Check membership of the marginal polytope within tolerance."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] != p.shape[1]:
        return False
    if p.size == 0:
        return False
    if np.min(p) < -tol:
        return False
    n = p.shape[0]
    ks = np.arange(1, n + 1, dtype=float)
    colsum = p.sum(axis=0)
    if np.max(p - colsum[None, :] / ks[None, :]) > tol:
        return False
    if colsum @ (1.0 / ks) > 1.0 + tol:
        return False
    return True


def full_r(p: np.ndarray) -> np.ndarray:
    """Length n+1 vector [prob_empty, r_1, ..., r_n]."""
    st = derived_stats(p)
    return np.concatenate(([st.prob_empty], st.r))


def expected_metric(cm: CompiledMetric, p: np.ndarray, q: np.ndarray) -> float:
    """Expectation of the metric when predictions ~ P and labels ~ Q.

    Both arguments are marginal matrices in Delta.  Uses the compiled grids:
    the slope part couples P and Q entrywise, the intercept part only their
    count distributions, and the special-case corners contribute explicit
    all-zeros / all-ones product terms.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    n = cm.n
    if p.shape != (n, n) or q.shape != (n, n):
        raise ValueError(f"marginal matrices must have shape ({n}, {n})")
    rp = full_r(p)
    rq = full_r(q)
    value = rp @ cm.inter @ rq
    value += float(np.sum(cm.slope[1:, 1:] * (p.T @ q)))
    if cm.pos_special:
        value += rp[0] * rq[0]
    if cm.neg_special:
        value += rp[n] * rq[n]
    return float(value)


def expected_constraint(form: ConstraintLinearForm, p: np.ndarray) -> float:
    """Expectation of a compiled constraint metric under prediction marginal P."""
    p = np.asarray(p, dtype=float)
    return float(np.sum(form.b_matrix * p) + form.mu)


def marginalize(weights: np.ndarray, patterns: np.ndarray) -> np.ndarray:
    """Marginal matrix of an explicit distribution over binary vectors.

    weights[j] is the probability of row patterns[j] (shape (m, n), 0/1).
    """
    weights = np.asarray(weights, dtype=float)
    patterns = np.asarray(patterns)
    n = patterns.shape[1]
    counts = patterns.sum(axis=1).astype(int)
    p = np.zeros((n, n))
    for k in range(1, n + 1):
        mask = counts == k
        if np.any(mask):
            p[:, k - 1] = weights[mask] @ patterns[mask]
    return p


def point_mass(yhat: np.ndarray) -> np.ndarray:
    """Marginal matrix of the deterministic vector yhat."""
    yhat = np.asarray(yhat, dtype=float)
    n = yhat.shape[0]
    p = np.zeros((n, n))
    k = int(round(float(yhat.sum())))
    if k >= 1:
        p[:, k - 1] = yhat
    return p


def random_marginal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Random element of Delta: normalized weights over all 2^n vectors."""
    patterns = bit_patterns(n)
    w = rng.random(patterns.shape[0])
    w /= w.sum()
    return marginalize(w, patterns)


def bit_patterns(n: int) -> np.ndarray:
    """All binary vectors of length n as a (2^n, n) float array."""
    idx = np.arange(2 ** n)
    return ((idx[:, None] >> np.arange(n)[None, :]) & 1).astype(float)
