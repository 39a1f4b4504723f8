"""Open-loop VCG / Groves mechanism for deterministic linear-quadratic agents."""
from dataclasses import dataclass

import numpy as np

from .lqg import ModelError, solve_open_loop


@dataclass(frozen=True)
class DetBid:
    """Reported dynamics ``x' = a x + b u``, stage utility ``q x^2 + r u^2``
    and initial state ``x0``."""

    a: float
    b: float
    q: float
    r: float
    x0: float

    def __post_init__(self):
        if self.q > 0:
            raise ModelError("q must be non-positive")
        if not self.r < 0:
            raise ModelError("r must be strictly negative")

    def utility(self, x, u):
        return self.q * x * x + self.r * u * u


@dataclass(frozen=True)
class DetOutcome:
    states: np.ndarray  # (T+1, N)
    controls: np.ndarray  # (T, N)

    def agent_values(self, bids):
        """Per-agent reported welfare summed over t < T."""
        T = self.controls.shape[0]
        q = np.array([b.q for b in bids])
        r = np.array([b.r for b in bids])
        X = self.states[:T]
        return (q * X * X + r * self.controls * self.controls).sum(axis=0)


def clear_dynamic_det(bids, T):
    """Solve the stacked balanced open-loop problem for the reported data."""
    if T < 1:
        raise ModelError("horizon must be >= 1")
    if len(bids) == 0:
        return DetOutcome(np.zeros((T + 1, 0)), np.zeros((T, 0)))
    cols = {k: np.array([getattr(b, k) for b in bids], dtype=np.float64) for k in "abqr"}
    x0 = np.array([b.x0 for b in bids], dtype=np.float64)
    X, U = solve_open_loop(cols["a"], cols["b"], cols["q"], cols["r"], T, x0)
    return DetOutcome(X, U)


def exclude_clear_dynamic(bids, i, T):
    return clear_dynamic_det(list(bids[:i]) + list(bids[i + 1:]), T)


def _pivot(T):
    def h(others):
        return float(clear_dynamic_det(others, T).agent_values(others).sum())

    return h


def _resolve_h(h, T):
    if h is None or h == "pivot":
        return _pivot(T)
    if h == "zero":
        return lambda others: 0.0
    if callable(h):
        return h
    raise ValueError(f"unknown h: {h!r}")


def payment_dynamic_det(bids, T, h=None, outcome=None):
    """Groves payments; ``h`` is "pivot" (default, VCG), "zero" or a callable
    of the other agents' bids."""
    h = _resolve_h(h, T)
    outcome = outcome or clear_dynamic_det(bids, T)
    vals = outcome.agent_values(bids)
    total = vals.sum()
    return np.array([h(list(bids[:i]) + list(bids[i + 1:])) - (total - vals[i]) for i in range(len(bids))])


def true_path(bid, controls):
    """Trajectory of one agent's dynamics driven by assigned ``controls``."""
    x = np.empty(len(controls) + 1)
    x[0] = bid.x0
    for t, u in enumerate(controls):
        x[t + 1] = bid.a * x[t] + bid.b * u
    return x


def dynamic_net_utility(truth, i, bids, T, h=None):
    """Agent ``i``'s net utility when the profile ``bids`` is reported.

    Assigned controls are executed on the agent's true dynamics ``truth``
    and scored with its true utility.
    """
    out = clear_dynamic_det(bids, T)
    p = payment_dynamic_det(bids, T, h, outcome=out)
    u = out.controls[:, i]
    x = true_path(truth, u)[:T]
    return float(np.sum(truth.q * x * x + truth.r * u * u) - p[i])
