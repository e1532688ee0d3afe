import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.linalg import null_space

from wlansdar.chain import QVector, assemble_tpm
from wlansdar.errors import NoConvergence, SingularSystem
from wlansdar.params import Scenario
from wlansdar.saturation import attempt_profile
from wlansdar.solver import (
    StationaryDist,
    gth,
    model_inputs,
    solve_sdar_model,
    stationary_vector,
    update_q,
)


def null_space_reference(p):
    v = null_space(p.T - np.eye(len(p)))[:, 0]
    return v / v.sum()


def test_two_state_chain_closed_form():
    a, b = 0.3, 0.05
    p = np.array([[1 - a, a], [b, 1 - b]])
    pi, res = stationary_vector(p)
    np.testing.assert_allclose(pi, [b / (a + b), a / (a + b)], rtol=1e-14)
    assert res < 1e-15


def test_gth_keeps_relative_accuracy_of_tiny_states():
    # birth-death chain whose tail probabilities fall like 1e-6^j
    n, up, down = 8, 1e-6, 0.5
    p = np.zeros((n, n))
    for i in range(n):
        if i + 1 < n:
            p[i, i + 1] = up
        if i > 0:
            p[i, i - 1] = down
        p[i, i] = 1 - p[i].sum()
    pi = gth(p)
    ratios = pi[1:] / pi[:-1]
    np.testing.assert_allclose(ratios, up / down, rtol=1e-12)


def test_identity_has_many_closed_classes():
    with pytest.raises(SingularSystem):
        stationary_vector(np.eye(3))


def test_transient_states_are_allowed():
    p = np.array([[0.5, 0.5, 0.0], [0.0, 0.2, 0.8], [0.0, 0.6, 0.4]])
    pi, _ = stationary_vector(p)
    assert pi[0] == pytest.approx(0.0, abs=1e-15)
    np.testing.assert_allclose(pi[1:], [0.6 / 1.4, 0.8 / 1.4])


def test_periodic_chain_solved():
    pi, _ = stationary_vector(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_allclose(pi, [0.5, 0.5])


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(0.01, 1.0)))
def test_gth_matches_null_space(raw):
    p = raw / raw.sum(axis=1, keepdims=True)
    pi, res = stationary_vector(p)
    np.testing.assert_allclose(pi, null_space_reference(p), rtol=1e-9, atol=1e-14)
    assert res < 1e-12


def test_update_q_hand_example():
    pi = np.array([[0.1, 0.1], [0.2, 0.1], [0.2, 0.3]])
    q = update_q(StationaryDist(pi, 0.0))
    np.testing.assert_allclose(q.q, [0.5, 0.25])


def test_update_q_without_busy_mass():
    pi = np.array([[0.5, 0.5], [0.0, 0.0]])
    assert update_q(StationaryDist(pi, 0.0)).q.tolist() == [1.0, 1.0]


def _solve(m, K, lam, **kw):
    s = Scenario.homogeneous(m, lam, buffer=K)
    return solve_sdar_model(s, attempt_profile(m, s.mac), **kw)


def test_buffer_one_forces_q_one():
    _, q, rep = _solve(5, 1, 40.0)
    np.testing.assert_allclose(q.q, 1.0)
    assert rep.converged


@pytest.mark.parametrize("m, K, lam", [(2, 3, 30.0), (10, 5, 5.0), (10, 5, 60.0), (10, 5, 200.0), (30, 5, 10.0)])
def test_fixed_point_is_self_consistent(m, K, lam):
    dist, q, rep = _solve(m, K, lam)
    assert rep.converged and rep.q_deltas[-1] < 1e-9
    s = Scenario.homogeneous(m, lam, buffer=K)
    inputs = model_inputs(s, attempt_profile(m, s.mac))
    p = assemble_tpm(inputs.blocks, q, K).p
    assert np.max(np.abs(dist.flat() @ p - dist.flat())) < 1e-10
    np.testing.assert_allclose(update_q(dist).q, q.q, atol=1e-8)
    assert dist.pi.sum() == pytest.approx(1.0)


def test_relaxation_reaches_the_same_point():
    _, q1, _ = _solve(10, 5, 60.0)
    _, q2, r2 = _solve(10, 5, 60.0, relaxation=0.5)
    np.testing.assert_allclose(q1.q, q2.q, atol=1e-7)
    assert r2.converged


def test_no_convergence_carries_report():
    with pytest.raises(NoConvergence) as ei:
        _solve(10, 5, 60.0, max_iter=1)
    assert ei.value.report.iterations == 1
    dist, q = ei.value.partial
    assert isinstance(q, QVector) and dist.pi.shape == (6, 10)
    assert set(ei.value.report.to_dict()) == {"converged", "iterations", "q_deltas", "stationary_residuals"}


def test_bad_arguments():
    s = Scenario.homogeneous(2, 1.0, buffer=None)
    with pytest.raises(ValueError):
        model_inputs(s, attempt_profile(2, s.mac))
    with pytest.raises(ValueError):
        _solve(2, 2, 1.0, relaxation=0.0)
