"""Property suites shared by the CLI and the acceptance tests."""
from dataclasses import dataclass

import numpy as np

from . import oracle
from .dyndet import DetBid, clear_dynamic_det
from .layered import decomposition_residual, run_mechanism, solve_stage, true_layers
from .lqg import AgentParams, MarketModel, Trajectory, balance_rows
from .sim import Strategy, draw_inits, exact_moments, ic_sweep, run_episode
from .static import StaticQuadraticBid, clear_static

RESIDUAL_TOL = 1e-9


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}  {self.detail}".rstrip()


def random_balanced_layers(model, rng):
    """Arbitrary (non-optimal) balanced ``U(s, t)`` for s <= t."""
    T, N = model.horizon, model.n_agents
    u = np.zeros((T, T, N))
    for s in range(T):
        raw = rng.normal(size=(T - s, N))
        u[s, s:] = raw - raw.mean(axis=1, keepdims=True)
    return u


def trajectory_from_layers(model, u_layers, inits):
    T, N = model.horizon, model.n_agents
    U = u_layers.sum(axis=0)
    X = np.zeros((T + 1, N))
    X[0] = inits[0]
    for t in range(T):
        X[t + 1] = model.a * X[t] + model.b * U[t] + inits[t + 1]
    return Trajectory(X, U, inits[1:])


def decomposition_suite(model, seed, episodes):
    """Layer identities on random decompositions and on truthful runs."""
    worst = np.zeros(3)
    worst_truth = np.zeros(3)
    balance = 0.0
    inits = draw_inits(model, seed, np.arange(episodes))
    for e in range(episodes):
        rng = np.random.default_rng([seed, e])
        u = random_balanced_layers(model, rng)
        traj = trajectory_from_layers(model, u, inits[e])
        x = true_layers(model, u, inits[e][: model.horizon])
        worst = np.maximum(worst, decomposition_residual(model, x, u, traj))

        ep = run_episode(model, [Strategy.truthful()] * model.n_agents, seed, e)
        x = true_layers(model, ep.u_layers, inits[e][: model.horizon])
        worst_truth = np.maximum(worst_truth, decomposition_residual(model, x, ep.u_layers, ep.true_trajectory))
        balance = max(balance, float(np.abs(ep.u_layers.sum(axis=2)).max()))
    names = ("state", "control", "welfare")
    out = [CheckResult(f"random layers {n} residual", bool(v < RESIDUAL_TOL), f"{v:.2e}") for n, v in zip(names, worst)]
    out += [CheckResult(f"truthful run {n} residual", bool(v < RESIDUAL_TOL), f"{v:.2e}") for n, v in zip(names, worst_truth)]
    out.append(CheckResult("layer balance", balance < 1e-10, f"{balance:.2e}"))
    return out


def ic_suite(model, agent, stage, grid, h_choice="zero", tol=1e-9, history=None):
    rows = ic_sweep(model, agent, stage, grid, h_choice, tol, history)
    vals = np.array([r.value for r in rows])
    best = rows[int(np.argmax(vals))].delta
    table = [CheckResult(f"delta={r.delta:+.4f}", not r.flagged, f"E[J]={r.value:.12g}") for r in rows]
    if stage == model.horizon - 1:
        spread = float(vals.max() - vals.min())
        verdict = CheckResult("final-stage flat payoff", spread <= tol * max(1.0, abs(vals).max()), f"spread={spread:.2e}")
    elif h_choice == "pivot":
        flags = sum(r.flagged for r in rows)
        verdict = CheckResult("pivot h (informational)", True, f"argmax delta={best:+.4f}, {flags} profitable deviation(s)")
    else:
        verdict = CheckResult("truth is the maximiser", not any(r.flagged for r in rows), f"argmax delta={best:+.4f}")
    return table + [verdict]


# fixture used for the cross-term negative control (needs T >= 3)
CONTROL_MODEL = MarketModel(
    [AgentParams(0.9, 1.0, -1.0, -0.5), AgentParams(-0.6, 0.7, -2.0, -1.0), AgentParams(1.1, 1.3, -0.5, -1.5)], 3
)


def conditional_ic(model, history, payment_brackets=None, step=1e-4):
    """Stationarity at delta = 0 of every agent's stage-1 payoff, given a
    realised history; returns the worst |derivative| and pass flag."""
    kw = {} if payment_brackets is None else {"payment_brackets": payment_brackets}
    worst, ok = 0.0, True
    for i in range(model.n_agents):
        def payoff(d, i=i):
            return float(exact_moments(model, i, d, 1, history=history, **kw).net_utility[i])

        deriv, passed = oracle.fd_consistency(payoff, step)
        worst = max(worst, abs(deriv))
        ok = ok and passed
    return worst, ok


def oracle_suite(model, seed=0, static_bids=None, max_points=2 * 10**6):
    """Grid-oracle certification of every clearing plus negative controls."""
    rng = np.random.default_rng(seed)
    T, N = model.horizon, model.n_agents
    out = []

    def add(check, negate=False):
        if negate:
            out.append(CheckResult(f"negative control: {check.name} must fail", not check.passed, str(check)))
        else:
            out.append(CheckResult(check.name, check.passed, str(check)))

    bids = list(static_bids) if static_bids else [
        StaticQuadraticBid(-rng.uniform(0.2, 2.0), rng.uniform(-3, 3)) for _ in range(max(N, 2))]
    obj = oracle.static_objective(bids)
    C1 = np.ones((1, len(bids)))
    add(oracle.check_against_grid("static clearing", obj, C1, [0.0], clear_static(bids), max_points))
    # random bids: a user profile may happen to balance without the constraint
    ctrl = [StaticQuadraticBid(-rng.uniform(0.2, 2.0), rng.uniform(-3, 3)) for _ in range(3)]
    add(oracle.check_against_grid("static clearing (balance dropped)", oracle.static_objective(ctrl), np.ones((1, 3)),
                                  [0.0], oracle.clear_static_dropped_balance(ctrl), max_points), negate=True)

    det = [DetBid(ag.a, ag.b, ag.q, ag.r, rng.normal()) for ag in model.agents]
    out_det = clear_dynamic_det(det, T)
    add(oracle.check_against_grid("dynamic clearing", oracle.dynamic_objective(det, T), balance_rows(N, T),
                                  np.zeros(T), out_det.controls.ravel(), max_points))

    bids_t = draw_inits(model, seed, [0])[0][:T]
    grid, _ = run_mechanism(model, bids_t)
    for s in range(T):
        hx = grid.x_hat[:s, s:].sum(axis=0)
        hu = grid.u[:s, s:].sum(axis=0)
        _, u = solve_stage(model, s, bids_t[s], hx, hu)
        obj = oracle.layer_objective(model, s, bids_t[s], hx, hu)
        C = balance_rows(N, T - s)
        add(oracle.check_against_grid(f"layer stage {s}", obj, C, np.zeros(T - s), u.ravel(), max_points))
        if s == 0:
            bad = oracle.solve_stage_dropped_balance(model, s, bids_t[s], hx, hu)
            add(oracle.check_against_grid("layer stage 0 (balance dropped)", obj, C, np.zeros(T - s), bad,
                                          max_points), negate=True)

    models = [CONTROL_MODEL] + ([model] if T >= 3 and N >= 2 else [])
    for k, mdl in enumerate(models):
        hist = draw_inits(mdl, seed + 1, [0])[0][:2]
        label = "fixture" if k == 0 else "scenario"
        worst, ok = conditional_ic(mdl, hist)
        out.append(CheckResult(f"conditional stage-1 stationarity ({label})", ok, f"|dJ/d delta|={worst:.2e}"))
        worst, ok = conditional_ic(mdl, hist, oracle.brackets_without_cross_terms)
        out.append(CheckResult(f"negative control: cross terms dropped ({label}) must fail", not ok,
                               f"|dJ/d delta|={worst:.2e}"))
    return out
