import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from strategic_lqg.qp import DegenerateProgramError, equality_qp_solve, null_space_basis


def test_two_variable_example():
    z = equality_qp_solve(-2 * np.eye(2), [2.0, -2.0], [[1.0, 1.0]], [0.0])
    np.testing.assert_allclose(z, [1.0, -1.0], atol=1e-14)


def test_zero_linear_term_gives_origin():
    z = equality_qp_solve(-np.diag([1.0, 3.0, 2.0]), np.zeros(3), np.ones((1, 3)), [0.0])
    assert np.all(z == 0.0)


def test_duplicated_inconsistent_rows_rejected():
    C = np.array([[1.0, 1.0], [1.0, 1.0]])
    with pytest.raises(DegenerateProgramError, match="degenerate program"):
        equality_qp_solve(-np.eye(2), np.zeros(2), C, [0.0, 1.0])


def test_not_concave_on_null_space_rejected():
    with pytest.raises(DegenerateProgramError):
        equality_qp_solve(np.diag([1.0, -1.0]), np.zeros(2), [[0.0, 1.0]], [0.0])


def test_multiple_right_hand_sides_match_single_solves(rng):
    A = rng.normal(size=(4, 4))
    H = -(A @ A.T + np.eye(4))
    C = rng.normal(size=(2, 4))
    F = rng.normal(size=(4, 3))
    Z = equality_qp_solve(H, F, C, np.zeros(2))
    for k in range(3):
        np.testing.assert_allclose(Z[:, k], equality_qp_solve(H, F[:, k], C, np.zeros(2)), atol=1e-12)


def test_null_space_basis_is_orthonormal_kernel(rng):
    C = rng.normal(size=(2, 5))
    Nb = null_space_basis(C, 5)
    assert Nb.shape == (5, 3)
    np.testing.assert_allclose(C @ Nb, 0, atol=1e-12)
    np.testing.assert_allclose(Nb.T @ Nb, np.eye(3), atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_solution_is_feasible_and_beats_feasible_perturbations(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n))
    H = -(A @ A.T + 0.5 * np.eye(n))
    f = rng.normal(size=n)
    k = rng.integers(1, n)
    C = rng.normal(size=(k, n))
    d = rng.normal(size=k)
    z = equality_qp_solve(H, f, C, d)
    np.testing.assert_allclose(C @ z, d, atol=1e-9)
    obj = lambda v: 0.5 * v @ H @ v + f @ v  # noqa: E731
    Nb = null_space_basis(C, n)
    for _ in range(10):
        assert obj(z + Nb @ rng.normal(size=Nb.shape[1])) <= obj(z) + 1e-9
