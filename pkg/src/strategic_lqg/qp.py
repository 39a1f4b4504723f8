"""Equality-constrained concave QP via the KKT system."""
import numpy as np


class DegenerateProgramError(ValueError):
    """The KKT system is singular or the objective is not strictly concave."""


def equality_qp_solve(H, f, C, d, check=True):
    """Maximise ``0.5 z'Hz + f'z`` subject to ``Cz = d``.

    Parameters
    ----------
    H : (n, n) array
        Symmetric, negative definite on the null space of ``C``.
    f : (n,) or (n, m) array
        Linear term; a 2-D ``f`` solves ``m`` programs sharing ``H`` and ``C``.
    C : (k, n) array
    d : (k,) or (k, m) array

    Returns
    -------
    z : ndarray with the trailing shape of ``f``.

    Raises
    ------
    DegenerateProgramError
        If the KKT matrix is singular (redundant or inconsistent rows) or
        ``H`` is not negative definite on ``null(C)``.
    """
    H = np.asarray(H, dtype=np.float64)
    f = np.asarray(f, dtype=np.float64)
    C = np.asarray(C, dtype=np.float64).reshape(-1, H.shape[0])
    d = np.asarray(d, dtype=np.float64)
    n, k = H.shape[0], C.shape[0]
    if f.ndim == 2 and d.ndim == 1:
        d = np.repeat(d[:, None], f.shape[1], axis=1)

    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = H
    kkt[:n, n:] = C.T
    kkt[n:, :n] = C
    if k and np.linalg.matrix_rank(C) < k:
        raise DegenerateProgramError("degenerate program: constraint rows are linearly dependent")
    if check:
        _check_concave(H, C)
    rhs = np.concatenate([-f, d], axis=0)
    try:
        sol = np.linalg.solve(kkt, rhs)
    except np.linalg.LinAlgError as exc:
        raise DegenerateProgramError(f"degenerate program: {exc}") from None
    z = sol[:n]
    if check:
        scale = 1.0 + np.abs(rhs).max(initial=0.0) + np.abs(kkt).max(initial=0.0) * np.abs(sol).max(initial=0.0)
        resid = np.abs(kkt @ sol - rhs).max(initial=0.0)
        if not np.isfinite(resid) or resid > 1e-9 * scale:
            raise DegenerateProgramError(f"degenerate program: KKT residual {resid:.3e}")
    return z


def null_space_basis(C, n):
    """Orthonormal basis of ``null(C)`` as an (n, n - rank) array."""
    if C.shape[0] == 0:
        return np.eye(n)
    _, s, vt = np.linalg.svd(C)
    rank = int((s > 1e-12 * max(1.0, s.max(initial=0.0))).sum())
    return vt[rank:].T


def _check_concave(H, C):
    Z = null_space_basis(C, H.shape[0])
    if Z.shape[1] == 0:
        return
    reduced = Z.T @ H @ Z
    reduced = 0.5 * (reduced + reduced.T)
    top = np.linalg.eigvalsh(reduced).max()
    if not top < -1e-12 * max(1.0, np.abs(reduced).max()):
        raise DegenerateProgramError(
            f"degenerate program: objective not strictly concave on constraint null space (max eig {top:.3e})"
        )
