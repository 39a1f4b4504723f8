"""Brute-force oracles and seeded-bug negative controls.

The grid oracle never looks at the QP matrices assembled by the mechanisms:
it evaluates the objective as a black box, recovers the (exactly quadratic)
restriction to the free coordinates by probing, and scans a product grid.
"""
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .layered import propagate, stage_objective
from .lqg import open_loop_program
from .qp import equality_qp_solve

MAX_GRID_POINTS = 10**7


@dataclass(frozen=True)
class Reduction:
    """Affine parameterisation ``z = E y + e0`` of ``{z : Cz = d}`` by the
    free coordinates ``y = z[free]``."""

    free: np.ndarray
    E: np.ndarray
    e0: np.ndarray

    def lift(self, y):
        return self.E @ y + self.e0


def eliminate(C, d, n):
    """Solve each constraint row for one dependent coordinate (latest first)."""
    C = np.asarray(C, dtype=np.float64).reshape(-1, n)
    d = np.asarray(d, dtype=np.float64).reshape(-1)
    dep = []
    for j in range(n - 1, -1, -1):
        if len(dep) == C.shape[0]:
            break
        cand = dep + [j]
        if np.linalg.matrix_rank(C[:, cand]) == len(cand):
            dep = cand
    if len(dep) < C.shape[0]:
        raise ValueError("constraint rows are dependent")
    dep = sorted(dep)
    free = np.array([j for j in range(n) if j not in dep], dtype=np.int64)
    Cd_inv = np.linalg.inv(C[:, dep])
    E = np.zeros((n, len(free)))
    E[free, np.arange(len(free))] = 1.0
    E[dep] = -Cd_inv @ C[:, free]
    e0 = np.zeros(n)
    e0[dep] = Cd_inv @ d
    return Reduction(free, E, e0)


def probe_quadratic(g, k):
    """Recover ``(H, f, c)`` with ``g(y) = 0.5 y'Hy + f'y + c`` from 1 + 2k + k(k-1)/2 evaluations."""
    eye = np.eye(k)
    c = g(np.zeros(k))
    plus = np.array([g(eye[i]) for i in range(k)])
    minus = np.array([g(-eye[i]) for i in range(k)])
    H = np.diag(plus + minus - 2.0 * c)
    f = 0.5 * (plus - minus)
    for i in range(k):
        for j in range(i + 1, k):
            H[i, j] = H[j, i] = g(eye[i] + eye[j]) - plus[i] - plus[j] + c
    return H, f, c


@dataclass(frozen=True)
class GridResult:
    z: np.ndarray  # best grid point, full coordinates
    value: float
    step: np.ndarray  # grid spacing per free coordinate
    free: np.ndarray


def grid_qp_oracle(objective, C, d, box, resolution, max_points=MAX_GRID_POINTS):
    """Exhaustive grid maximiser of ``objective`` on ``{Cz = d}``.

    ``box`` is ``(lo, hi)`` over the free coordinates (scalars broadcast);
    ``resolution`` is the grid step (scalar or per coordinate).
    """
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    n = C.shape[1]
    red = eliminate(C, d, n)
    k = len(red.free)
    if k == 0:
        z = red.e0
        return GridResult(z, float(objective(z)), np.zeros(0), red.free)
    lo = np.broadcast_to(np.asarray(box[0], dtype=np.float64), (k,)).copy()
    hi = np.broadcast_to(np.asarray(box[1], dtype=np.float64), (k,)).copy()
    step = np.broadcast_to(np.asarray(resolution, dtype=np.float64), (k,)).copy()
    if np.any(step <= 0) or np.any(hi < lo):
        raise ValueError("empty grid")
    counts = np.floor((hi - lo) / step + 1e-9).astype(np.int64) + 1
    if math.prod(counts.tolist()) > max_points:
        raise ValueError(f"grid of {math.prod(counts.tolist())} points exceeds {max_points}")

    def g(y):
        return float(objective(red.lift(y)))

    Hq, fq, c = probe_quadratic(g, k)
    idx, _ = kernels.grid_argmax(Hq, fq, c, lo, step, counts)
    z = red.lift(lo + np.asarray(idx) * step)
    return GridResult(z, float(objective(z)), step, red.free)


@dataclass(frozen=True)
class OracleCheck:
    name: str
    passed: bool
    feasibility: float  # max |Cz - d| of the candidate
    margin: float  # objective(candidate) - best grid value (>= -tol to pass)
    distance: float  # max |candidate - grid argmax| in steps, free coords

    def __str__(self):
        flag = "PASS" if self.passed else "FAIL"
        return (f"{flag} {self.name}: feasibility={self.feasibility:.2e} "
                f"margin={self.margin:.2e} distance={self.distance:.3f} steps")


def auto_box(y, points_per_dim, pad=1.0):
    """Integer-aligned box around ``y`` and the step giving ``points_per_dim``."""
    lo = np.floor(y) - pad
    hi = np.ceil(y) + pad
    step = (hi - lo) / (points_per_dim - 1)
    return (lo, hi), step


def check_against_grid(name, objective, C, d, candidate, max_points=MAX_GRID_POINTS, tol=1e-9, box=None,
                       resolution=None):
    """Certify a claimed maximiser: feasible, beats or ties every grid point
    and within one grid step of the grid argmax."""
    C = np.atleast_2d(np.asarray(C, dtype=np.float64))
    d = np.asarray(d, dtype=np.float64).reshape(-1)
    candidate = np.asarray(candidate, dtype=np.float64)
    feas = float(np.abs(C @ candidate - d).max(initial=0.0))
    red = eliminate(C, d, C.shape[1])
    y = candidate[red.free]
    if box is None:
        k = max(len(y), 1)
        ppd = max(3, int(math.floor(max_points ** (1.0 / k) + 1e-9)))
        box, resolution = auto_box(y, ppd)
    res = grid_qp_oracle(objective, C, d, box, resolution, max_points)
    cand_val = float(objective(red.lift(y)))
    scale = max(1.0, abs(res.value))
    margin = cand_val - res.value
    dist = float(np.max(np.abs(y - res.z[red.free]) / res.step)) if len(y) else 0.0
    passed = feas <= 1e-9 * max(1.0, np.abs(candidate).max(initial=0.0)) and margin >= -tol * scale and dist <= 1.0 + 1e-9
    return OracleCheck(name, bool(passed), feas, margin, dist)


@dataclass(frozen=True)
class ResponseSearch:
    best: float
    passed: bool
    payoffs: np.ndarray


def best_response_search(payoff, grid, truthful, tol=1e-9):
    """Grid best response of one agent.

    Passes iff the truthful bid is within one grid step of a maximiser
    (ties within ``tol`` count, so a flat payoff passes).
    """
    grid = np.sort(np.asarray(grid, dtype=np.float64))
    vals = np.array([payoff(g) for g in grid])
    top = vals.max()
    winners = grid[vals >= top - tol * max(1.0, abs(top))]
    step = np.min(np.diff(grid)) if len(grid) > 1 else 0.0
    passed = bool(np.min(np.abs(winners - truthful)) <= step * (1 + 1e-9))
    return ResponseSearch(float(grid[int(np.argmax(vals))]), passed, vals)


def fd_consistency(payoff, step=1e-4):
    """Central difference of ``payoff`` at 0; returns ``(derivative, passed)``
    with the stationarity threshold ``1e-6 * max(1, |payoff(0)|)``."""
    deriv = (payoff(step) - payoff(-step)) / (2.0 * step)
    return deriv, bool(abs(deriv) <= 1e-6 * max(1.0, abs(payoff(0.0))))


# -- objectives evaluated directly (no QP assembly) --------------------------

def static_objective(bids):
    r = np.array([b.curvature for b in bids])
    beta = np.array([b.linear for b in bids])
    return lambda u: float(np.sum(r * u * u + beta * u))


def dynamic_objective(bids, T):
    """Reported welfare of stacked controls, simulating the reported dynamics."""
    N = len(bids)

    def value(z):
        U = np.asarray(z).reshape(T, N)
        x = np.array([b.x0 for b in bids], dtype=np.float64)
        total = 0.0
        for t in range(T):
            total += sum(b.q * x[j] ** 2 + b.r * U[t, j] ** 2 for j, b in enumerate(bids))
            x = np.array([b.a * x[j] + b.b * U[t, j] for j, b in enumerate(bids)])
        return total

    return value


def layer_objective(model, s, bid, hist_x, hist_u):
    """``L_s`` as a function of the stacked stage controls."""
    N, L = model.n_agents, model.horizon - s

    def value(z):
        u = np.asarray(z).reshape(L, N)
        return stage_objective(model, s, propagate(model.a, model.b, np.asarray(bid, float), u), u, hist_x, hist_u)

    return value


# -- seeded bugs -------------------------------------------------------------

def brackets_without_cross_terms(q, r, x_new, u_new, hist_x, hist_u, dot):
    """Payment bracket with the cross terms against earlier layers dropped."""
    from .layered import stage_brackets

    return stage_brackets(q, r, x_new, u_new, np.zeros_like(hist_x), np.zeros_like(hist_u), dot)


def solve_stage_dropped_balance(model, s, bid, hist_x, hist_u):
    """Stage solve that forgets the balance row of its first time step."""
    L = model.horizon - s
    H, f, C, d = open_loop_program(model.a, model.b, model.q, model.r, L, bid, hist_x, hist_u)
    return equality_qp_solve(H, f, C[1:], d[1:], check=False)


def clear_static_dropped_balance(bids):
    return np.array([-b.linear / (2.0 * b.curvature) for b in bids])
