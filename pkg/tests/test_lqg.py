import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_model
from strategic_lqg import (AgentParams, MarketModel, ModelError, analytic_social_welfare, random_social_welfare,
                           simulate_closed_loop, solve_balanced_lqr, validate_model)
from strategic_lqg.lqg import Trajectory, balance_rows, helmert_basis, open_loop_program
from strategic_lqg.qp import equality_qp_solve


def test_reference_model_accepted(ref_model):
    assert validate_model(ref_model) is ref_model


@pytest.mark.parametrize("field, value, message", [
    ("r", 0.0, "r must be strictly negative"),
    ("sigma", -1.0, "sigma must be positive"),
    ("q", 0.5, "q must be non-positive"),
    ("zeta", 0.0, "zeta must be positive"),
])
def test_invalid_agent_reports_index(field, value, message):
    kw = dict(a=1, b=1, q=-1, r=-1)
    kw[field] = value
    bad = AgentParams(**kw)
    model = MarketModel([AgentParams(1, 1, -1, -1), bad], 2)
    with pytest.raises(ModelError, match=f"agent 1: {message}"):
        validate_model(model)


def test_empty_or_zero_horizon_rejected():
    with pytest.raises(ModelError):
        validate_model(MarketModel([], 2))
    with pytest.raises(ModelError):
        validate_model(MarketModel([AgentParams(1, 1, -1, -1)], 0))


def test_helmert_basis_orthonormal_and_balanced():
    for n in range(1, 7):
        M = helmert_basis(n)
        assert M.shape == (n, n - 1)
        np.testing.assert_allclose(M.T @ M, np.eye(n - 1), atol=1e-14)
        np.testing.assert_allclose(M.sum(axis=0), 0, atol=1e-14)


def test_single_agent_gains_vanish():
    model = MarketModel([AgentParams(0.7, 2.0, -1.0, -0.3)], 4)
    assert np.all(solve_balanced_lqr(model).gains == 0.0)


def test_reference_gains(ref_model):
    K = solve_balanced_lqr(ref_model).gains
    np.testing.assert_allclose(K[0] @ [1.0, -1.0], [-0.5, 0.5], atol=1e-14)
    np.testing.assert_allclose(K[1], 0.0, atol=1e-15)


def test_reference_vertex_by_scan():
    # welfare of u(0) = (alpha, -alpha) from x0 = (1, -1) is -2 - 2 alpha^2 - 2 (1 + alpha)^2
    alphas = np.linspace(-2, 2, 40001)
    best = alphas[np.argmax(-2 * alphas**2 - 2 * (1 + alphas) ** 2)]
    assert best == pytest.approx(-0.5, abs=1e-4)


def test_gains_keep_balance(rng):
    for _ in range(10):
        model = random_model(rng, int(rng.integers(1, 6)), int(rng.integers(1, 5)))
        K = solve_balanced_lqr(model).gains
        X = rng.normal(size=(100, model.n_agents))
        for t in range(model.horizon):
            assert np.abs((X @ K[t].T).sum(axis=1)).max() < 1e-10


def test_zero_start_stays_at_origin(ref_model):
    traj = simulate_closed_loop(ref_model, solve_balanced_lqr(ref_model), np.zeros((2, 2)), np.zeros(2))
    assert not traj.states.any() and not traj.controls.any()


def test_reference_closed_loop_and_welfare(ref_model):
    traj = simulate_closed_loop(ref_model, solve_balanced_lqr(ref_model), np.zeros((2, 2)), [1.0, -1.0])
    np.testing.assert_allclose(traj.states[1], [0.5, -0.5], atol=1e-14)
    assert random_social_welfare(traj, ref_model) == pytest.approx(-3.0, abs=1e-12)


def test_recursion_residual(rng):
    model = random_model(rng, 3, 5)
    W = rng.normal(size=(5, 3))
    traj = simulate_closed_loop(model, solve_balanced_lqr(model), W, rng.normal(size=3))
    resid = traj.states[1:] - (model.a * traj.states[:-1] + model.b * traj.controls + W)
    assert np.abs(resid).max() < 1e-12


def test_dimension_mismatch(ref_model):
    with pytest.raises(ModelError):
        simulate_closed_loop(ref_model, solve_balanced_lqr(ref_model), np.zeros((3, 2)), np.zeros(2))
    with pytest.raises(ModelError):
        random_social_welfare(Trajectory(np.zeros((3, 3)), np.zeros((2, 3)), np.zeros((2, 3))), ref_model)


def test_zero_trajectory_welfare(ref_model):
    assert random_social_welfare(Trajectory(np.zeros((3, 2)), np.zeros((2, 2)), np.zeros((2, 2))), ref_model) == 0.0


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_welfare_is_non_positive(n, T, seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, n, T)
    traj = Trajectory(rng.normal(size=(T + 1, n)), rng.normal(size=(T, n)), rng.normal(size=(T, n)))
    assert random_social_welfare(traj, model) <= 0.0


def _stacked_optimum(model, x0):
    """Maximiser of the deterministic stacked program built by hand (independent of the Riccati code)."""
    N, T = model.n_agents, model.horizon
    # x(t) = A^t x0 + sum_{m<t} A^(t-1-m) B u(m), assembled by simulating unit controls
    def states(z):
        U = z.reshape(T, N)
        x = np.array(x0, dtype=float)
        out = []
        for t in range(T):
            out.append(x)
            x = model.a * x + model.b * U[t]
        return np.array(out)

    n = T * N
    base = states(np.zeros(n)).ravel()
    G = np.column_stack([states(e).ravel() - base for e in np.eye(n)])
    q = np.tile(model.q, T)
    r = np.tile(model.r, T)
    H = 2 * (G.T @ (q[:, None] * G) + np.diag(r))
    f = 2 * G.T @ (q * base)
    z = equality_qp_solve(H, f, balance_rows(N, T), np.zeros(T))
    return z.reshape(T, N)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 4), st.integers(1, 4), st.integers(0, 2**32 - 1))
def test_riccati_matches_stacked_program(n, T, seed):
    rng = np.random.default_rng(seed)
    model = random_model(rng, n, T)
    x0 = rng.normal(size=n)
    traj = simulate_closed_loop(model, solve_balanced_lqr(model), np.zeros((T, n)), x0)
    np.testing.assert_allclose(traj.controls, _stacked_optimum(model, x0), atol=1e-8)


def test_open_loop_program_matches_hand_assembly(rng):
    model = random_model(rng, 3, 3)
    x0 = rng.normal(size=3)
    H, f, C, d = open_loop_program(model.a, model.b, model.q, model.r, 3, x0)
    z = equality_qp_solve(H, f, C, d).reshape(3, 3)
    np.testing.assert_allclose(z, _stacked_optimum(model, x0), atol=1e-10)


def test_analytic_welfare_reference_value(ref_model):
    # P_1 = Q (final stage) and with K(0) the reduced value at t=0; check against direct moments
    P = solve_balanced_lqr(ref_model).values
    np.testing.assert_allclose(P[1], -np.eye(2), atol=1e-14)
    assert analytic_social_welfare(ref_model) == pytest.approx(np.trace(P[0]) + np.trace(P[1]))


def test_analytic_welfare_matches_sampled_mean(rng):
    model = random_model(rng, 3, 3)
    gains = solve_balanced_lqr(model)
    vals = []
    for _ in range(20000):
        x0 = rng.normal(size=3) * np.sqrt(model.zeta)
        W = rng.normal(size=(3, 3)) * np.sqrt(model.sigma)
        vals.append(random_social_welfare(simulate_closed_loop(model, gains, W, x0), model))
    vals = np.array(vals)
    se = vals.std(ddof=1) / np.sqrt(len(vals))
    assert abs(vals.mean() - analytic_social_welfare(model)) < 4 * se
