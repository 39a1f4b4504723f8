"""Strategic agents, Monte Carlo episodes and the exact expectation evaluator."""
import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .layered import LayeredMechanism, MomentDot, stage_brackets
from .lqg import Trajectory

# episodes are simulated in fixed-size chunks so results never depend on
# how many worker threads process them
CHUNK = 256
THREADS_ENV = "STRATEGIC_LQG_THREADS"


@dataclass(frozen=True)
class Strategy:
    """Bid policy of one agent.

    ``kind`` is one of "truthful", "additive" (bid ``w + delta`` at
    ``stage``), "scaling" (bid ``gamma * w`` at ``stage``) or "custom"
    (``fn(stage, true_value, own_past_bids)``; arrays over episodes).
    """

    kind: str = "truthful"
    stage: int | None = None
    delta: float = 0.0
    gamma: float = 1.0
    fn: Callable | None = None

    @classmethod
    def truthful(cls):
        return cls()

    @classmethod
    def additive(cls, delta, stage):
        return cls("additive", stage=stage, delta=float(delta))

    @classmethod
    def scaling(cls, gamma, stage):
        return cls("scaling", stage=stage, gamma=float(gamma))

    @classmethod
    def custom(cls, fn):
        return cls("custom", fn=fn)

    def bid(self, stage, true_value, history):
        if self.kind == "truthful":
            return true_value
        if self.kind == "additive":
            return true_value + self.delta if stage == self.stage else true_value
        if self.kind == "scaling":
            return self.gamma * true_value if stage == self.stage else true_value
        if self.kind == "custom":
            return np.asarray(self.fn(stage, true_value, history), dtype=np.float64)
        raise ValueError(f"unknown strategy kind {self.kind!r}")

    def key(self):
        fn = getattr(self.fn, "__qualname__", None)
        return f"{self.kind}:{self.stage}:{self.delta!r}:{self.gamma!r}:{fn}"


@dataclass(frozen=True)
class MCConfig:
    episodes: int
    master_seed: int = 0
    common_random_numbers: bool = True

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")


@dataclass
class EpisodeBatch:
    """Episode-major arrays for a batch of simulated episodes."""

    episodes: np.ndarray  # (E,)
    inits: np.ndarray  # (E, T+1, N): X(0), W(0), ..., W(T-1)
    states: np.ndarray  # (E, T+1, N)
    controls: np.ndarray  # (E, T, N) total assigned controls
    bids: np.ndarray  # (E, T, N)
    payments: np.ndarray  # (E, T, N)
    stage_utility: np.ndarray  # (E, T, N)
    x_hat: np.ndarray  # (E, T, T, N)
    u_layers: np.ndarray  # (E, T, T, N)
    stage_values: np.ndarray  # (E, T)

    @property
    def net_utilities(self):
        return self.stage_utility.sum(axis=1) - self.payments.sum(axis=1)

    @property
    def rsw(self):
        return self.stage_utility.sum(axis=(1, 2))

    @property
    def noises(self):
        return self.inits[:, 1:]


@dataclass
class EpisodeResult:
    true_trajectory: Trajectory
    bids: np.ndarray
    x_hat: np.ndarray
    u_layers: np.ndarray
    payments: np.ndarray
    stage_values: np.ndarray
    stage_utility: np.ndarray
    net_utilities: np.ndarray


@dataclass(frozen=True)
class MCEstimate:
    mean: np.ndarray
    stderr: np.ndarray
    rsw_mean: float
    rsw_stderr: float
    total_payments: float
    episodes: int


def episode_seed(master_seed, strategies, common_random_numbers=True):
    """Seed actually fed to the noise generator.

    With common random numbers every strategy profile shares the noise of
    ``master_seed``; otherwise the profile is hashed into the seed.
    """
    if common_random_numbers:
        return int(master_seed)
    text = f"{int(master_seed)}|" + "|".join(s.key() for s in strategies)
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


def draw_inits(model, seed, episodes):
    """Scaled Gaussian layer starts ``(E, T+1, N)``: X(0) then W(0..T-1)."""
    z = kernels.standard_normals(seed, np.asarray(episodes, dtype=np.uint64), model.horizon + 1, model.n_agents)
    scale = np.vstack([np.sqrt(model.zeta), np.tile(np.sqrt(model.sigma), (model.horizon, 1))])
    return z * scale


def simulate_batch(model, strategies, seed, episodes, h_choice="zero", inits=None, x0=None):
    """Simulate the listed episode indices in one vectorised pass.

    ``x0`` pins the initial state instead of drawing it from N(0, Z).
    """
    T, N = model.horizon, model.n_agents
    if len(strategies) != N:
        raise ValueError("need one strategy per agent")
    episodes = np.asarray(episodes, dtype=np.int64)
    E = len(episodes)
    if inits is None:
        inits = draw_inits(model, seed, episodes)
    if x0 is not None:
        inits = inits.copy()
        inits[:, 0] = np.asarray(x0, dtype=np.float64)
    init = np.moveaxis(inits, 0, -1)  # (T+1, N, E)
    mech = LayeredMechanism(model, h_choice, columns=E)
    x = np.zeros((T + 1, N, E))
    U = np.zeros((T, N, E))
    bids = np.zeros((T, N, E))
    x[0] = init[0]
    for s in range(T):
        for i, strat in enumerate(strategies):
            bids[s, i] = strat.bid(s, init[s, i], bids[:s, i])
        mech.step(bids[s])
        U[s] = mech.u[: s + 1, s].sum(axis=0)
        x[s + 1] = model.a[:, None] * x[s] + model.b[:, None] * U[s] + init[s + 1]
    util = model.q[:, None] * x[:T] ** 2 + model.r[:, None] * U ** 2
    grid, ledger = mech.result()
    ep_first = lambda arr: np.moveaxis(arr, -1, 0)  # noqa: E731
    return EpisodeBatch(
        episodes=episodes,
        inits=inits,
        states=ep_first(x),
        controls=ep_first(U),
        bids=ep_first(bids),
        payments=ep_first(ledger.payments),
        stage_utility=ep_first(util),
        x_hat=ep_first(grid.x_hat),
        u_layers=ep_first(grid.u),
        stage_values=ep_first(ledger.stage_values),
    )


def run_episode(model, strategies, seed, episode=0, h_choice="zero", x0=None):
    """One reproducible episode; the noise is keyed by ``(seed, episode)``."""
    b = simulate_batch(model, strategies, seed, [episode], h_choice, x0=x0)
    traj = Trajectory(b.states[0], b.controls[0], b.noises[0])
    return EpisodeResult(
        true_trajectory=traj,
        bids=b.bids[0],
        x_hat=b.x_hat[0],
        u_layers=b.u_layers[0],
        payments=b.payments[0],
        stage_values=b.stage_values[0],
        stage_utility=b.stage_utility[0],
        net_utilities=b.net_utilities[0],
    )


def thread_count():
    n = int(os.environ.get(THREADS_ENV, "0") or 0)
    return n if n > 0 else (os.cpu_count() or 1)


def iter_chunks(episodes):
    return [np.arange(lo, min(lo + CHUNK, episodes)) for lo in range(0, episodes, CHUNK)]


def simulate_many(model, strategies, mc, h_choice="zero", threads=None, x0=None):
    """All ``mc.episodes`` episodes as a list of chunk batches, in order."""
    seed = episode_seed(mc.master_seed, strategies, mc.common_random_numbers)
    chunks = iter_chunks(mc.episodes)
    threads = threads or thread_count()
    job = lambda idx: simulate_batch(model, strategies, seed, idx, h_choice, x0=x0)  # noqa: E731
    if threads == 1 or len(chunks) == 1:
        return [job(c) for c in chunks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, chunks))


def _mean_se(x):
    n = x.shape[0]
    mean = x.mean(axis=0)
    se = x.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros_like(mean)
    return mean, se


def summarize(batches):
    """Reduce chunk batches (in episode order) to an :class:`MCEstimate`."""
    net = np.concatenate([b.net_utilities for b in batches])
    rsw = np.concatenate([b.rsw for b in batches])
    pay = np.concatenate([b.payments.sum(axis=(1, 2)) for b in batches])
    mean, se = _mean_se(net)
    rm, rse = _mean_se(rsw)
    return MCEstimate(mean, se, float(rm), float(rse), float(pay.mean()), len(net))


def expected_net_utility_mc(model, strategies, mc, h_choice="zero", threads=None, x0=None):
    """Per-agent Monte Carlo mean and standard error of net utility."""
    return summarize(simulate_many(model, strategies, mc, h_choice, threads, x0))


@dataclass(frozen=True)
class ExactMoments:
    net_utility: np.ndarray  # E[J_i] per agent
    rsw: float
    payments: np.ndarray  # E[p_i(s)], [s, agent]


def exact_moments(model, agent=0, delta=0.0, stage=0, h_choice="zero", history=None,
                  payment_brackets=stage_brackets):
    """Exact expectations when ``agent`` adds ``delta`` to its stage bid.

    Every other bid is truthful.  Each quantity is carried as coefficients
    over the independent Gaussian layer starts plus a constant, so the
    affine mechanism maps are followed exactly and ``E[a b]`` is a weighted
    inner product.  ``history`` (``[k, agent]``) fixes the realised layer
    starts of stages ``0..k-1``, giving expectations conditional on them.
    """
    T, N = model.horizon, model.n_agents
    m = N * T + 1
    const = m - 1
    weights = np.zeros(m)
    weights[const] = 1.0
    init = np.zeros((T, N, m))
    fixed = 0 if history is None else len(history)
    for s in range(T):
        var = model.zeta if s == 0 else model.sigma
        for j in range(N):
            if s < fixed:
                init[s, j, const] = history[s][j]
            else:
                init[s, j, s * N + j] = 1.0
                weights[s * N + j] = var[j]
    dot = MomentDot(weights)
    mech = LayeredMechanism(model, h_choice, columns=m, dot=dot, payment_brackets=payment_brackets)
    x = init[0].copy()
    util = np.zeros(N)
    for s in range(T):
        bid = init[s].copy()
        if s == stage:
            bid[agent, const] += delta
        mech.step(bid)
        u = mech.u[: s + 1, s].sum(axis=0)
        util += model.q * dot(x, x) + model.r * dot(u, u)
        if s + 1 < T:
            x = model.a[:, None] * x + model.b[:, None] * u + init[s + 1]
    pay = np.array(mech.payments)
    return ExactMoments(util - pay.sum(axis=0), float(util.sum()), pay)


def exact_expected_net_utility(model, agent, delta, stage, h_choice="zero", history=None):
    return float(exact_moments(model, agent, delta, stage, h_choice, history).net_utility[agent])


def deviation_quadratic(model, agent, stage, h_choice="zero", history=None):
    """Fit ``E[J](delta)`` through delta in {-1, 0, 1}.

    Returns ``(curvature, vertex, residual)`` where curvature is the
    second-order coefficient, ``vertex`` its maximiser (``nan`` when flat)
    and ``residual`` the misfit of the point delta = 2.
    """
    f = {d: exact_expected_net_utility(model, agent, d, stage, h_choice, history) for d in (-1.0, 0.0, 1.0, 2.0)}
    c2 = 0.5 * (f[1.0] + f[-1.0]) - f[0.0]
    c1 = 0.5 * (f[1.0] - f[-1.0])
    resid = abs(f[0.0] + 2.0 * c1 + 4.0 * c2 - f[2.0])
    scale = max(1.0, abs(f[0.0]))
    vertex = -c1 / (2.0 * c2) if abs(c2) > 1e-12 * scale else float("nan")
    return c2, vertex, resid


@dataclass(frozen=True)
class SweepRow:
    delta: float
    value: float
    flagged: bool


def ic_sweep(model, agent, stage, grid, h_choice="zero", tol=1e-9, history=None):
    """Exact deviation payoffs over ``grid`` (must contain 0), sorted by delta.

    A row is flagged when it beats truth-telling by more than ``tol``.
    """
    grid = sorted(float(d) for d in grid)
    if not any(d == 0.0 for d in grid):
        raise ValueError("deviation grid must contain 0")
    vals = [exact_expected_net_utility(model, agent, d, stage, h_choice, history) for d in grid]
    base = vals[grid.index(0.0)]
    return [SweepRow(d, v, v > base + tol) for d, v in zip(grid, vals)]
