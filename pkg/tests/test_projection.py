"""Projection onto the marginal polytope: oracle agreement and invariants."""

import numpy as np
import pytest

from apmetric.marginals import is_in_delta
from apmetric.oracles import projection_oracle
from apmetric.projection import (
    ProjectionState,
    project_delta,
    project_delta_reference,
    project_delta_state,
)

ORACLE_TOL = 5e-6       # generic QP solvers are good to ~1e-7 per entry
FAST_VS_REF_TOL = 1e-8
STATE_TOL = 1e-8


def _random_inputs(rng, n, count):
    for _ in range(count):
        scale = float(rng.choice([0.3, 1.0, 3.0]))
        yield rng.normal(scale=scale, size=(n, n))


def test_matches_qp_oracle_small(rng):
    for n in (1, 2, 3, 5):
        for a in _random_inputs(rng, n, 5):
            got = project_delta(a)
            want = projection_oracle(a)
            assert np.max(np.abs(got - want)) < ORACLE_TOL


def test_feasible_input_is_fixed_point(rng):
    from apmetric.marginals import random_marginal

    for n in (2, 4, 6):
        for _ in range(5):
            p = random_marginal(n, rng)
            np.testing.assert_allclose(project_delta(p), p, atol=1e-9)


def test_all_negative_projects_to_zero(rng):
    a = -np.abs(rng.normal(size=(5, 5))) - 0.1
    np.testing.assert_allclose(project_delta(a), np.zeros((5, 5)), atol=1e-12)


def test_fast_agrees_with_reference(rng):
    for n in (1, 2, 3, 7, 12, 25):
        for a in _random_inputs(rng, n, 8):
            fast = project_delta(a)
            ref = project_delta_reference(a)
            assert np.max(np.abs(fast - ref)) < FAST_VS_REF_TOL


def test_outputs_feasible(rng):
    for n in (1, 3, 8, 25):
        for a in _random_inputs(rng, n, 10):
            assert is_in_delta(project_delta(a), tol=1e-10)


def test_idempotent(rng):
    for n in (2, 6, 15):
        for a in _random_inputs(rng, n, 5):
            p = project_delta(a)
            np.testing.assert_allclose(project_delta(p), p, atol=1e-9)


def test_state_does_not_change_results(rng):
    """Warm-started projections must equal cold ones on unrelated inputs."""
    n = 10
    a0 = rng.normal(size=(n, n)) * 3.0
    _, state = project_delta_state(a0)
    for a in _random_inputs(rng, n, 10):
        cold, _ = project_delta_state(a)
        warm, _ = project_delta_state(a, state)
        assert np.max(np.abs(cold - warm)) < STATE_TOL


def test_state_along_drifting_sequence(rng):
    """Simulates the solver's usage: a slowly drifting input, state carried."""
    n = 12
    a = rng.normal(size=(n, n))
    state = None
    for _ in range(30):
        a = a + 0.05 * rng.normal(size=(n, n))
        warm, state = project_delta_state(a, state)
        cold = project_delta_reference(a)
        assert np.max(np.abs(warm - cold)) < FAST_VS_REF_TOL
        assert is_in_delta(warm, tol=1e-10)


def test_state_shape_mismatch_ignored(rng):
    # A state from a different batch size must not break or skew results.
    _, small = project_delta_state(rng.normal(size=(3, 3)))
    a = rng.normal(size=(6, 6))
    cold, _ = project_delta_state(a)
    mixed, _ = project_delta_state(a, small)
    np.testing.assert_allclose(mixed, cold, atol=STATE_TOL)


def test_projection_state_fields(rng):
    a = np.abs(rng.normal(size=(4, 4))) + 1.0
    _, state = project_delta_state(a)
    assert isinstance(state, ProjectionState)
    assert state.eta >= 0.0
    assert state.t.shape == (4,)
    assert state.m.shape == (4,)


def test_scaling_invariance_of_zero(rng):
    assert not project_delta(np.zeros((4, 4))).any()
