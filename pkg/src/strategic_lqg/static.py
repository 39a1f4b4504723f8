"""One-shot VCG / Groves market with quadratic bids and a balance constraint."""
from dataclasses import dataclass

import numpy as np

from .lqg import ModelError


@dataclass(frozen=True)
class StaticQuadraticBid:
    """Reported utility ``curvature * u**2 + linear * u``."""

    curvature: float
    linear: float = 0.0

    def __post_init__(self):
        if not self.curvature < 0:
            raise ModelError("curvature must be strictly negative")

    def __call__(self, u):
        return self.curvature * u * u + self.linear * u


@dataclass(frozen=True)
class StaticOutcome:
    allocation: np.ndarray
    excluded_allocations: tuple  # entry i: allocation of agents j != i, in order
    payments: np.ndarray
    welfare: float
    excluded_empty: tuple  # True where the excluded market had no agents


def _arrays(bids):
    r = np.array([b.curvature for b in bids], dtype=np.float64)
    beta = np.array([b.linear for b in bids], dtype=np.float64)
    if np.any(r >= 0):
        raise ModelError("curvature must be strictly negative")
    return r, beta


def clear_static(bids):
    """Welfare-maximising balanced allocation.

    ``u_i = (lam - beta_i) / (2 r_i)`` with the price ``lam`` fixing
    ``sum(u) = 0``.
    """
    if len(bids) == 0:
        return np.zeros(0)
    r, beta = _arrays(bids)
    if len(bids) == 1:
        return np.zeros(1)
    # lam - beta_i written as a weighted mean of differences, so equal
    # linear terms give an exact zero
    w = 1.0 / r
    gap = (beta[None, :] - beta[:, None]) @ w / w.sum()
    return gap / (2.0 * r)


def exclude_clear_static(bids, i):
    """Clearing over agents ``j != i``; empty when ``i`` is the only agent."""
    return clear_static(list(bids[:i]) + list(bids[i + 1:]))


def reported_welfare(bids, u):
    return float(sum(b(x) for b, x in zip(bids, u)))


def _others_welfare(bids, u, i):
    return sum(b(x) for j, (b, x) in enumerate(zip(bids, u)) if j != i)


def pivot_h(others):
    """Clarke pivot: optimal welfare of the market without the agent."""
    return reported_welfare(others, clear_static(others))


def groves_payment_static(bids, h):
    """``p_i = h(bids without i) - sum_{j != i} bid_j(u*_j)``.

    ``h`` only ever sees the other agents' bids.
    """
    u = clear_static(bids)
    return np.array(
        [h(list(bids[:i]) + list(bids[i + 1:])) - _others_welfare(bids, u, i) for i in range(len(bids))]
    )


def vcg_payment_static(bids):
    return groves_payment_static(bids, pivot_h)


def run_static(bids, h=pivot_h):
    u = clear_static(bids)
    excluded = tuple(exclude_clear_static(bids, i) for i in range(len(bids)))
    return StaticOutcome(
        allocation=u,
        excluded_allocations=excluded,
        payments=groves_payment_static(bids, h),
        welfare=reported_welfare(bids, u),
        excluded_empty=tuple(len(x) == 0 for x in excluded),
    )


def static_net_utility(true_utilities, bids, h=pivot_h):
    """Per-agent ``F_i(u*_i) - p_i`` where ``F_i`` is the true utility."""
    u = clear_static(bids)
    p = groves_payment_static(bids, h)
    return np.array([F(x) for F, x in zip(true_utilities, u)]) - p
