"""Balance-constrained LQG market model, Riccati solver and welfare accounting."""
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .qp import DegenerateProgramError, equality_qp_solve


class ModelError(ValueError):
    """Malformed market model or scenario input."""


@dataclass(frozen=True)
class AgentParams:
    """Scalar LQG agent: x' = a x + b u + w, utility q x^2 + r u^2.

    ``sigma`` is the noise variance and ``zeta`` the initial-state variance.
    """

    a: float
    b: float
    q: float
    r: float
    sigma: float = 1.0
    zeta: float = 1.0


@dataclass(frozen=True)
class MarketModel:
    agents: tuple
    horizon: int

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))

    @property
    def n_agents(self):
        return len(self.agents)

    def _vec(self, name):
        return np.array([getattr(ag, name) for ag in self.agents], dtype=np.float64)

    @cached_property
    def a(self):
        return self._vec("a")

    @cached_property
    def b(self):
        return self._vec("b")

    @cached_property
    def q(self):
        return self._vec("q")

    @cached_property
    def r(self):
        return self._vec("r")

    @cached_property
    def sigma(self):
        return self._vec("sigma")

    @cached_property
    def zeta(self):
        return self._vec("zeta")

    # diagonal matrix views
    A = property(lambda self: np.diag(self.a))
    B = property(lambda self: np.diag(self.b))
    Q = property(lambda self: np.diag(self.q))
    R = property(lambda self: np.diag(self.r))
    Sigma = property(lambda self: np.diag(self.sigma))
    Z = property(lambda self: np.diag(self.zeta))

    def without(self, i):
        """Model with agent ``i`` removed (same horizon)."""
        return MarketModel(self.agents[:i] + self.agents[i + 1:], self.horizon)


@dataclass(frozen=True)
class Trajectory:
    """``states`` has T+1 rows, ``controls`` and ``noises`` have T rows."""

    states: np.ndarray
    controls: np.ndarray
    noises: np.ndarray


@dataclass(frozen=True)
class FeedbackGain:
    """Per-stage gains ``K[t]`` (N x N) and value matrices ``P[t]``, t = 0..T."""

    gains: np.ndarray
    values: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.gains)


def validate_model(model):
    """Return ``model`` if every agent satisfies the LQG sign conditions."""
    if not isinstance(model.horizon, (int, np.integer)) or model.horizon < 1:
        raise ModelError("horizon must be an integer >= 1")
    if len(model.agents) < 1:
        raise ModelError("model needs at least one agent")
    for i, ag in enumerate(model.agents):
        vals = [ag.a, ag.b, ag.q, ag.r, ag.sigma, ag.zeta]
        if not all(np.isfinite(v) for v in vals):
            raise ModelError(f"agent {i}: parameters must be finite")
        if ag.q > 0:
            raise ModelError(f"agent {i}: q must be non-positive")
        if ag.r >= 0:
            raise ModelError(f"agent {i}: r must be strictly negative")
        if ag.sigma <= 0:
            raise ModelError(f"agent {i}: sigma must be positive")
        if ag.zeta <= 0:
            raise ModelError(f"agent {i}: zeta must be positive")
    return model


def helmert_basis(n):
    """Orthonormal (n, n-1) basis of {u : sum(u) = 0} (Helmert columns)."""
    M = np.zeros((n, max(n - 1, 0)))
    for k in range(1, n):
        M[:k, k - 1] = 1.0
        M[k, k - 1] = -float(k)
        M[:, k - 1] /= np.sqrt(k * (k + 1.0))
    return M


def solve_balanced_lqr(model):
    """Finite-horizon Riccati recursion restricted to balanced controls.

    Controls are parameterised as ``U = M v`` with ``M`` the Helmert basis, so
    the recursion runs on the reduced problem and gains are lifted back.
    """
    N, T = model.n_agents, model.horizon
    A, Q, R = model.A, model.Q, model.R
    gains = np.zeros((T, N, N))
    P = np.zeros((T + 1, N, N))
    if N == 1:
        for t in range(T - 1, -1, -1):
            P[t] = Q + model.a[0] ** 2 * P[t + 1]
        return FeedbackGain(gains, P)
    M = helmert_basis(N)
    Br = model.B @ M
    Rr = M.T @ R @ M
    for t in range(T - 1, -1, -1):
        Pn = P[t + 1]
        S = Rr + Br.T @ Pn @ Br
        try:
            np.linalg.cholesky(-S)
        except np.linalg.LinAlgError:
            raise DegenerateProgramError(f"stage {t}: reduced control weight is not negative definite") from None
        Kr = -np.linalg.solve(S, Br.T @ Pn @ A)
        gains[t] = M @ Kr
        Acl = A + Br @ Kr
        P[t] = Q + Kr.T @ Rr @ Kr + Acl.T @ Pn @ Acl
        P[t] = 0.5 * (P[t] + P[t].T)
    return FeedbackGain(gains, P)


def simulate_closed_loop(model, gains, noises, x0):
    """Run ``X(t+1) = A X(t) + B K(t) X(t) + W(t)`` for t = 0..T-1."""
    N, T = model.n_agents, model.horizon
    noises = np.asarray(noises, dtype=np.float64)
    x0 = np.asarray(x0, dtype=np.float64)
    if noises.shape != (T, N) or x0.shape != (N,):
        raise ModelError(f"expected noises {(T, N)} and x0 {(N,)}, got {noises.shape} and {x0.shape}")
    K = gains.gains if isinstance(gains, FeedbackGain) else np.asarray(gains)
    X = np.zeros((T + 1, N))
    U = np.zeros((T, N))
    X[0] = x0
    for t in range(T):
        U[t] = K[t] @ X[t]
        X[t + 1] = model.a * X[t] + model.b * U[t] + noises[t]
    return Trajectory(X, U, noises)


def random_social_welfare(trajectory, model):
    """Sum over t < T of X'QX + U'RU."""
    T = model.horizon
    X = np.asarray(trajectory.states)[:T]
    U = np.asarray(trajectory.controls)[:T]
    if X.shape != (T, model.n_agents) or U.shape != (T, model.n_agents):
        raise ModelError("trajectory does not match model dimensions")
    return float(np.sum(X * X * model.q) + np.sum(U * U * model.r))


def analytic_social_welfare(model, gains=None):
    """Expected welfare of the optimal balanced closed loop.

    Equals ``tr(Z P_0) + sum_{t=1}^{T-1} tr(Sigma P_t)``.
    """
    gains = gains or solve_balanced_lqr(model)
    P = gains.values
    sw = float(np.dot(model.zeta, np.diag(P[0])))
    for t in range(1, model.horizon):
        sw += float(np.dot(model.sigma, np.diag(P[t])))
    return sw


def open_loop_matrices(a, b, horizon):
    """Zero-noise propagation ``x = Phi x0 + Gamma z`` for stacked controls.

    States and controls are stacked time-major: index ``k * N + j`` is agent
    ``j`` at offset ``k``.  Diagonal dynamics only.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    N, L = len(a), horizon
    Phi = np.zeros((L * N, N))
    Gamma = np.zeros((L * N, L * N))
    for k in range(L):
        Phi[k * N:(k + 1) * N] = np.diag(a ** k)
        for m in range(k):
            Gamma[k * N:(k + 1) * N, m * N:(m + 1) * N] = np.diag(a ** (k - 1 - m) * b)
    return Phi, Gamma


def balance_rows(n_agents, horizon):
    """One row per time step summing that step's controls."""
    return np.kron(np.eye(horizon), np.ones((1, n_agents)))


def open_loop_program(a, b, q, r, horizon, x0, hx=None, hu=None):
    """Concave QP ``(H, f, C, d)`` for the balanced open-loop problem.

    The objective is ``sum_t x'Qx + u'Ru + 2 hx'Q x + 2 hu'R u`` with
    ``hx``/``hu`` of shape ``(horizon, N[, m])`` (cross terms against earlier
    layers); with them absent this is the plain deterministic problem.
    """
    a = np.asarray(a, dtype=np.float64)
    N, L = len(a), horizon
    Phi, Gamma = open_loop_matrices(a, b, L)
    qbar = np.tile(np.asarray(q, dtype=np.float64), L)
    rbar = np.tile(np.asarray(r, dtype=np.float64), L)
    x0 = np.asarray(x0, dtype=np.float64)
    batch = x0.shape[1:]
    xs = Phi @ x0
    if hx is not None:
        xs = xs + np.asarray(hx, dtype=np.float64).reshape((L * N,) + batch)
    H = 2.0 * (Gamma.T @ (qbar[:, None] * Gamma) + np.diag(rbar))
    f = 2.0 * (Gamma.T @ (qbar.reshape((-1,) + (1,) * len(batch)) * xs))
    if hu is not None:
        f = f + 2.0 * rbar.reshape((-1,) + (1,) * len(batch)) * np.asarray(hu, dtype=np.float64).reshape((L * N,) + batch)
    C = balance_rows(N, L)
    d = np.zeros((L,) + batch)
    return H, f, C, d


def solve_open_loop(a, b, q, r, horizon, x0):
    """Balanced open-loop optimum; returns ``(states (L+1, N), controls (L, N))``."""
    a = np.asarray(a, dtype=np.float64)
    N = len(a)
    if N == 1:
        U = np.zeros((horizon, 1))
    else:
        H, f, C, d = open_loop_program(a, b, q, r, horizon, x0)
        U = equality_qp_solve(H, f, C, d).reshape(horizon, N)
    X = np.zeros((horizon + 1, N))
    X[0] = x0
    for t in range(horizon):
        X[t + 1] = a * X[t] + np.asarray(b) * U[t]
    return X, U
