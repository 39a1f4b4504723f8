"""Layered stochastic VCG mechanism for balance-constrained LQG agents.

The state is split into layers ``X(s, t)``: layer ``s`` starts from the
disturbance revealed at stage ``s`` and is propagated without noise under the
controls ``U(s, t)`` that the independent system operator (ISO) allocates at
stage ``s``.  At every stage the ISO maximises the layer objective ``L_s``
(own quadratic terms plus cross terms against all earlier layers) and charges
Groves payments built from the other agents' share of ``L_s``.

All arrays carry a trailing column axis.  Numerically a column is one
episode; the exact evaluator in :mod:`strategic_lqg.sim` instead feeds
coefficient columns of a Gaussian basis and supplies a moment ``dot``.
"""
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .lqg import ModelError, open_loop_matrices, open_loop_program
from .qp import equality_qp_solve

H_CHOICES = ("zero", "pivot")


def numeric_dot(a, b):
    return a * b


class MomentDot:
    """``E[a b]`` for quantities stored as coefficient vectors over independent
    basis variables with second moments ``weights``."""

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=np.float64)

    def __call__(self, a, b):
        return (a * b) @ self.weights


@dataclass
class LayerGrid:
    """Triangular layer arrays indexed ``[s, t, agent, column]`` (zero for t < s)."""

    x_hat: np.ndarray
    u: np.ndarray
    x: np.ndarray | None = None  # true-noise layers, when known

    def totals(self, which="u"):
        """Sum over layers: ``sum_{s <= t} layer[s, t]`` per t."""
        return getattr(self, which).sum(axis=0)


@dataclass
class LayeredLedger:
    payments: np.ndarray  # [s, agent, column]
    stage_values: np.ndarray  # [s, column]
    h_choice: str
    pivot_undefined: bool = False  # pivot requested with a single agent


@dataclass(frozen=True)
class _StageOperator:
    phi: np.ndarray
    gamma: np.ndarray
    from_bid: np.ndarray
    from_hx: np.ndarray
    from_hu: np.ndarray


@lru_cache(maxsize=256)
def _stage_operator(a, b, q, r, length):
    # the stage maximiser is linear in (bid, history); solve the KKT system
    # once for every unit linear term and reuse the map
    N = len(a)
    n = N * length
    Phi, Gamma = open_loop_matrices(a, b, length)
    if N == 1:
        S = np.zeros((n, n))  # balance pins a lone agent's control to zero
    else:
        H, _, C, _ = open_loop_program(a, b, q, r, length, np.zeros(N))
        S = equality_qp_solve(H, np.eye(n), C, np.zeros((length, n)))
    qbar = np.tile(np.asarray(q), length)
    rbar = np.tile(np.asarray(r), length)
    GtQ = Gamma.T * qbar
    return _StageOperator(
        phi=Phi,
        gamma=Gamma,
        from_bid=2.0 * S @ GtQ @ Phi,
        from_hx=2.0 * S @ GtQ,
        from_hu=2.0 * S * rbar,
    )


def _params(model, idx=None):
    cols = [model.a, model.b, model.q, model.r]
    if idx is not None:
        cols = [c[idx] for c in cols]
    return tuple(tuple(float(v) for v in c) for c in cols)


def _weight(v, arr):
    return np.asarray(v).reshape((-1,) + (1,) * (arr.ndim - 1))


def stage_brackets(q, r, x_new, u_new, hist_x, hist_u, dot=numeric_dot):
    """Per-agent contribution to ``L_s``.

    ``x_new``/``u_new``/``hist_*`` are ``[t, agent, column]`` over t = s..T-1;
    the result is ``[agent(, column)]``.
    """
    xx = dot(x_new, x_new) + 2.0 * dot(hist_x, x_new)
    uu = dot(u_new, u_new) + 2.0 * dot(hist_u, u_new)
    return (_weight(q, xx[0]) * xx + _weight(r, uu[0]) * uu).sum(axis=0)


def propagate(a, b, x0, u):
    """Zero-noise layer trajectory from ``x0`` under controls ``u[k]``."""
    a = _weight(a, x0)
    b = _weight(b, x0)
    x = np.empty_like(u)
    x[0] = x0
    for k in range(1, len(u)):
        x[k] = a * x[k - 1] + b * u[k - 1]
    return x


def _solve(params, bid, hist_x, hist_u):
    a, b, q, r = params
    L, N = hist_x.shape[:2]
    op = _stage_operator(a, b, q, r, L)
    cols = bid.shape[1:]
    z = (op.from_bid @ bid + op.from_hx @ hist_x.reshape((L * N,) + cols)
         + op.from_hu @ hist_u.reshape((L * N,) + cols))
    u = z.reshape((L, N) + cols)
    x = propagate(a, b, bid, u)
    return x, u


def solve_stage(model, s, bid, hist_x=None, hist_u=None):
    """Direct KKT solve of the stage-``s`` problem for one bid vector.

    ``hist_x``/``hist_u`` are ``[t, agent]`` sums of earlier layers for
    t = s..T-1.  Returns ``(x_hat, u)`` each ``[t, agent]``.
    """
    T, N = model.horizon, model.n_agents
    L = T - s
    if not 0 <= s < T:
        raise ModelError(f"stage {s} outside 0..{T - 1}")
    bid = np.asarray(bid, dtype=np.float64)
    hist_x = np.zeros((L, N)) if hist_x is None else np.asarray(hist_x, dtype=np.float64)
    hist_u = np.zeros((L, N)) if hist_u is None else np.asarray(hist_u, dtype=np.float64)
    H, f, C, d = open_loop_program(model.a, model.b, model.q, model.r, L, bid, hist_x, hist_u)
    u = equality_qp_solve(H, f, C, d).reshape(L, N)
    return propagate(model.a, model.b, bid, u), u


def stage_objective(model, s, x_new, u_new, hist_x=None, hist_u=None, atol=1e-9):
    """``L_s`` for a candidate layer; history sums default to zero (``L_0``)."""
    x_new = np.asarray(x_new, dtype=np.float64)
    u_new = np.asarray(u_new, dtype=np.float64)
    expect = propagate(model.a, model.b, x_new[0], u_new)
    if np.abs(expect - x_new).max(initial=0.0) > atol * (1.0 + np.abs(x_new).max(initial=0.0)):
        raise ModelError(f"stage {s}: layer does not follow zero-noise propagation")
    hist_x = np.zeros_like(x_new) if hist_x is None else np.asarray(hist_x, dtype=np.float64)
    hist_u = np.zeros_like(u_new) if hist_u is None else np.asarray(hist_u, dtype=np.float64)
    return float(stage_brackets(model.q, model.r, x_new, u_new, hist_x, hist_u).sum())


def layer_objectives(model, x_layers, u_layers):
    """All ``L_s`` for single-column layer arrays ``[s, t, agent]``."""
    T = model.horizon
    out = np.zeros(T)
    for s in range(T):
        hx = x_layers[:s, s:].sum(axis=0)
        hu = u_layers[:s, s:].sum(axis=0)
        out[s] = stage_objective(model, s, x_layers[s, s:], u_layers[s, s:], hx, hu)
    return out


class LayeredMechanism:
    """Sequential ISO for the layered mechanism.

    Call :meth:`step` once per stage with the bid vectors ``[agent, column]``.
    ``payment_brackets`` is the bracket function used for payments only; the
    allocation always maximises the true ``L_s``.
    """

    def __init__(self, model, h_choice="zero", columns=1, dot=numeric_dot, payment_brackets=stage_brackets):
        if h_choice not in H_CHOICES:
            raise ValueError(f"h_choice must be one of {H_CHOICES}")
        self.model = model
        self.h_choice = h_choice
        self.dot = dot
        self.payment_brackets = payment_brackets
        T, N = model.horizon, model.n_agents
        self.x_hat = np.zeros((T, T, N, columns))
        self.u = np.zeros((T, T, N, columns))
        self.payments = []
        self.values = []
        self.stage = 0
        self._params = _params(model)

    def history(self, s):
        return self.x_hat[:s, s:].sum(axis=0), self.u[:s, s:].sum(axis=0)

    def step(self, bid):
        m = self.model
        s = self.stage
        if s >= m.horizon:
            raise ModelError("all stages already cleared")
        bid = np.asarray(bid, dtype=np.float64).reshape(self.x_hat.shape[2:])
        hx, hu = self.history(s)
        x, u = _solve(self._params, bid, hx, hu)
        self.x_hat[s, s:] = x
        self.u[s, s:] = u

        own = stage_brackets(m.q, m.r, x, u, hx, hu, self.dot)
        pay = self.payment_brackets(m.q, m.r, x, u, hx, hu, self.dot)
        others = pay.sum(axis=0) - pay
        self.payments.append(self.pivot_values(bid, hx, hu) - others)
        self.values.append(own.sum(axis=0))
        self.stage += 1
        return u

    def pivot_values(self, bid, hx, hu):
        m = self.model
        N = m.n_agents
        zero = np.zeros((N,) + self.dot(bid[0], bid[0]).shape)
        if self.h_choice == "zero" or N == 1:
            return zero
        for i in range(N):
            idx = [j for j in range(N) if j != i]
            params = _params(m, idx)
            x, u = _solve(params, bid[idx], hx[:, idx], hu[:, idx])
            zero[i] = stage_brackets(params[2], params[3], x, u, hx[:, idx], hu[:, idx], self.dot).sum(axis=0)
        return zero

    @property
    def pivot_undefined(self):
        return self.h_choice == "pivot" and self.model.n_agents == 1

    def result(self):
        grid = LayerGrid(self.x_hat, self.u)
        ledger = LayeredLedger(np.array(self.payments), np.array(self.values), self.h_choice, self.pivot_undefined)
        return grid, ledger


def run_mechanism(model, bids, h_choice="zero"):
    """Run all stages for bids ``[s, agent]`` (or ``[s, agent, column]``).

    Returns ``(LayerGrid, LayeredLedger)``; single-column inputs give arrays
    without the column axis.
    """
    bids = np.asarray(bids, dtype=np.float64)
    squeeze = bids.ndim == 2
    if squeeze:
        bids = bids[..., None]
    if bids.shape[:2] != (model.horizon, model.n_agents):
        raise ModelError(f"expected bids of shape {(model.horizon, model.n_agents)}, got {bids.shape[:2]}")
    mech = LayeredMechanism(model, h_choice, columns=bids.shape[2])
    for s in range(model.horizon):
        mech.step(bids[s])
    grid, ledger = mech.result()
    if squeeze:
        grid = LayerGrid(grid.x_hat[..., 0], grid.u[..., 0])
        ledger = LayeredLedger(ledger.payments[..., 0], ledger.stage_values[..., 0], ledger.h_choice,
                               ledger.pivot_undefined)
    return grid, ledger


def true_layers(model, u_layers, layer_inits):
    """Layers ``X(s, t)`` started from the true ``X(s, s)`` under ``U(s, t)``.

    ``layer_inits[s]`` is ``X(0)`` for s = 0 and ``W(s-1)`` afterwards.
    """
    T = model.horizon
    x = np.zeros_like(u_layers)
    for s in range(T):
        x[s, s:] = propagate(model.a, model.b, layer_inits[s], u_layers[s, s:])
    return x


def decomposition_residual(model, x_layers, u_layers, trajectory):
    """Residuals of the layer identities against a true trajectory.

    Returns ``(max |sum_s X(s,t) - X(t)|, max |sum_s U(s,t) - U(t)|,
    |sum_s L_s - RSW|)`` for single-column arrays.
    """
    from .lqg import random_social_welfare

    T = model.horizon
    xs = np.abs(x_layers.sum(axis=0) - trajectory.states[:T]).max(initial=0.0)
    us = np.abs(u_layers.sum(axis=0) - trajectory.controls[:T]).max(initial=0.0)
    total = layer_objectives(model, x_layers, u_layers).sum()
    ws = abs(total - random_social_welfare(trajectory, model))
    return float(xs), float(us), float(ws)


def stage_gain_diagnostic(model):
    """Largest gap between the layer map ``X(s,s) -> U(s,s)`` and the
    Riccati gain ``K(s)``, over all stages."""
    from .lqg import solve_balanced_lqr

    K = solve_balanced_lqr(model).gains
    N = model.n_agents
    gap = 0.0
    for s in range(model.horizon):
        op = _stage_operator(*_params(model), model.horizon - s)
        gap = max(gap, float(np.abs(op.from_bid[:N] - K[s]).max(initial=0.0)))
    return gap
