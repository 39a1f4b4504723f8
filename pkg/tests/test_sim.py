import numpy as np
import pytest

from conftest import random_model
from strategic_lqg import AgentParams, MarketModel, analytic_social_welfare
from strategic_lqg.sim import (CHUNK, MCConfig, Strategy, deviation_quadratic, episode_seed, exact_moments,
                               exact_expected_net_utility, expected_net_utility_mc, ic_sweep, run_episode,
                               simulate_batch, simulate_many, summarize)

TRUTH2 = [Strategy.truthful()] * 2


def tiny_noise_ref():
    return MarketModel([AgentParams(1, 1, -1, -1, sigma=1e-300, zeta=1.0)] * 2, 2)


def _assert_same_result(a, b):
    for field in ("bids", "x_hat", "u_layers", "payments", "stage_values", "stage_utility", "net_utilities"):
        np.testing.assert_array_equal(getattr(a, field), getattr(b, field))
    np.testing.assert_array_equal(a.true_trajectory.states, b.true_trajectory.states)


def test_run_episode_is_deterministic(rng):
    model = random_model(rng, 3, 3)
    truth = [Strategy.truthful()] * 3
    _assert_same_result(run_episode(model, truth, 42, 7), run_episode(model, truth, 42, 7))
    assert not np.array_equal(run_episode(model, truth, 42, 7).net_utilities,
                              run_episode(model, truth, 43, 7).net_utilities)


def test_zero_deviation_is_truthful(rng):
    model = random_model(rng, 3, 3)
    dev = [Strategy.additive(0.0, 1), Strategy.scaling(1.0, 0), Strategy.truthful()]
    _assert_same_result(run_episode(model, dev, 5, 2), run_episode(model, [Strategy.truthful()] * 3, 5, 2))


def test_vanishing_noise_reproduces_reference_example():
    ep = run_episode(tiny_noise_ref(), TRUTH2, 3, x0=[1.0, -1.0])
    np.testing.assert_allclose(ep.stage_utility[:, 0], [-1.25, -0.25], atol=1e-12)
    np.testing.assert_allclose(ep.payments[:, 0], [1.5, 0.0], atol=1e-12)
    assert ep.net_utilities[0] == pytest.approx(-3.0, abs=1e-12)


def test_zero_variance_has_zero_stderr():
    est = expected_net_utility_mc(tiny_noise_ref(), TRUTH2, MCConfig(50, 1), x0=[1.0, -1.0])
    single = run_episode(tiny_noise_ref(), TRUTH2, 1, x0=[1.0, -1.0])
    assert np.all(est.stderr == 0.0)
    np.testing.assert_array_equal(est.mean, single.net_utilities)


def test_custom_strategy_sees_own_history(rng):
    model = random_model(rng, 2, 3)
    seen = []

    def shade(stage, w, past):
        seen.append(past.shape[0])
        return 0.5 * w

    ep = run_episode(model, [Strategy.custom(shade), Strategy.truthful()], 0)
    assert seen == [0, 1, 2]
    assert ep.bids[0, 0] == pytest.approx(0.5 * ep.true_trajectory.states[0, 0])


def test_strategy_count_checked(ref_model):
    with pytest.raises(ValueError):
        run_episode(ref_model, [Strategy.truthful()], 0)


def test_common_random_numbers_share_noise(rng):
    model = random_model(rng, 3, 3)
    truth = [Strategy.truthful()] * 3
    dev = [Strategy.additive(1.0, 0)] + truth[1:]
    mc = MCConfig(300, 11)
    a = np.concatenate([b.noises for b in simulate_many(model, truth, mc)])
    b = np.concatenate([b.noises for b in simulate_many(model, dev, mc)])
    np.testing.assert_array_equal(a, b)
    off = MCConfig(300, 11, common_random_numbers=False)
    c = np.concatenate([b.noises for b in simulate_many(model, dev, off)])
    assert not np.array_equal(a, c)
    assert episode_seed(11, dev, False) != episode_seed(11, truth, False)


def test_results_independent_of_thread_count(rng):
    model = random_model(rng, 3, 3)
    truth = [Strategy.truthful()] * 3
    mc = MCConfig(3 * CHUNK + 17, 4)
    one = summarize(simulate_many(model, truth, mc, threads=1))
    four = summarize(simulate_many(model, truth, mc, threads=4))
    np.testing.assert_array_equal(one.mean, four.mean)
    assert one.rsw_mean == four.rsw_mean


def test_batches_match_single_episodes(rng):
    model = random_model(rng, 2, 3)
    batch = simulate_batch(model, TRUTH2, 8, [0, 1, 2])
    for k in range(3):
        np.testing.assert_allclose(batch.net_utilities[k], run_episode(model, TRUTH2, 8, k).net_utilities,
                                   rtol=0, atol=1e-12)


def test_symmetric_agents_have_equal_means():
    model = MarketModel([AgentParams(0.9, 1.0, -1.0, -0.5)] * 2, 3)
    est = expected_net_utility_mc(model, TRUTH2, MCConfig(10_000, 2))
    assert abs(est.mean[0] - est.mean[1]) <= 3 * np.hypot(*est.stderr)


def test_rsw_matches_analytic_welfare(rng):
    for _ in range(3):
        model = random_model(rng, int(rng.integers(2, 4)), int(rng.integers(1, 4)))
        est = expected_net_utility_mc(model, [Strategy.truthful()] * model.n_agents, MCConfig(10_000, 6))
        assert abs(est.rsw_mean - analytic_social_welfare(model)) <= 3 * est.rsw_stderr


def test_exact_rsw_equals_analytic(rng):
    for _ in range(5):
        model = random_model(rng, int(rng.integers(2, 4)), int(rng.integers(1, 5)))
        assert exact_moments(model).rsw == pytest.approx(analytic_social_welfare(model), rel=1e-10)


@pytest.mark.parametrize("h", ["zero", "pivot"])
def test_exact_agrees_with_monte_carlo(h, rng):
    for _ in range(3):
        model = random_model(rng, 3, 3)
        i, s, d = int(rng.integers(3)), int(rng.integers(3)), float(rng.normal())
        strategies = [Strategy.truthful()] * 3
        strategies[i] = Strategy.additive(d, s)
        est = expected_net_utility_mc(model, strategies, MCConfig(10_000, 21), h)
        exact = exact_moments(model, i, d, s, h)
        assert np.all(np.abs(est.mean - exact.net_utility) <= 4 * est.stderr)


def test_conditional_exact_matches_pinned_start(rng):
    model = random_model(rng, 2, 3)
    x0 = [0.7, -1.1]
    est = expected_net_utility_mc(model, TRUTH2, MCConfig(10_000, 9), x0=x0)
    exact = exact_moments(model, history=[x0]).net_utility
    assert np.all(np.abs(est.mean - exact) <= 4 * est.stderr)


def test_exact_zero_deviation(rng):
    model = random_model(rng, 3, 3)
    base = exact_moments(model).net_utility
    for s in range(3):
        assert exact_expected_net_utility(model, 1, 0.0, s) == base[1]


def test_deviation_payoff_is_concave_quadratic_with_vertex_at_truth(rng):
    for _ in range(10):
        model = random_model(rng, int(rng.integers(2, 4)), int(rng.integers(2, 4)))
        for i in range(model.n_agents):
            for s in range(model.horizon - 1):
                c2, vertex, resid = deviation_quadratic(model, i, s)
                assert resid < 1e-9 and c2 < 0 and abs(vertex) <= 1e-7


def test_final_stage_deviation_is_flat(rng):
    model = random_model(rng, 3, 3)
    c2, vertex, resid = deviation_quadratic(model, 0, 2)
    base = exact_expected_net_utility(model, 0, 0.0, 2)
    assert abs(c2) < 1e-12 and np.isnan(vertex)
    assert abs(exact_expected_net_utility(model, 0, 3.0, 2) - base) < 1e-9 * max(1, abs(base))


def test_sweep_single_point(ref_model):
    rows = ic_sweep(ref_model, 0, 0, [0.0])
    assert len(rows) == 1 and not rows[0].flagged


def test_sweep_requires_zero(ref_model):
    with pytest.raises(ValueError):
        ic_sweep(ref_model, 0, 0, [1.0])


def test_sweep_reference_peaks_at_truth(ref_model):
    rows = ic_sweep(ref_model, 0, 0, np.arange(-2, 2.0001, 0.25))
    assert [r.delta for r in rows] == sorted(r.delta for r in rows)
    best = max(rows, key=lambda r: r.value)
    assert best.delta == 0.0 and not any(r.flagged for r in rows)


def test_sweep_final_stage_flat(ref_model):
    vals = [r.value for r in ic_sweep(ref_model, 1, 1, np.linspace(-2, 2, 9))]
    assert max(vals) - min(vals) <= 1e-9


def test_mc_config_validation():
    with pytest.raises(ValueError):
        MCConfig(0)
