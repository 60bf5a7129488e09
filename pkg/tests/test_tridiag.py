import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from endowment_hedge.errors import ZeroPivot
from endowment_hedge.tridiag import TridiagonalFactor, tridiagonal_solve


def dense(sub, diag, sup):
    return np.diag(diag) + np.diag(sub, -1) + np.diag(sup, 1)


def test_identity():
    x = tridiagonal_solve([0, 0], [1, 1, 1], [0, 0], [1, 2, 3])
    np.testing.assert_array_equal(x, [1, 2, 3])


def test_two_by_two_by_hand():
    x = tridiagonal_solve([1.0], [2.0, 2.0], [1.0], [3.0, 3.0])
    np.testing.assert_allclose(x, [1.0, 1.0], rtol=0, atol=1e-15)


def test_single_equation():
    np.testing.assert_allclose(tridiagonal_solve([], [4.0], [], [2.0]), [0.5])


def test_against_dense_solver():
    rng = np.random.default_rng(7)
    n = 50
    sub, sup = rng.uniform(-1, 1, n - 1), rng.uniform(-1, 1, n - 1)
    diag = 2.5 + rng.uniform(0, 1, n)
    rhs = rng.normal(size=n)
    ref = np.linalg.solve(dense(sub, diag, sup), rhs)
    assert np.max(np.abs(tridiagonal_solve(sub, diag, sup, rhs) - ref)) < 1e-10


def test_zero_pivot():
    with pytest.raises(ZeroPivot):
        tridiagonal_solve([1.0], [1.0, 1.0], [1.0], [1.0, 2.0])
    with pytest.raises(ZeroPivot):
        tridiagonal_solve([], [0.0], [], [1.0])


def test_shape_mismatch():
    with pytest.raises(ValueError):
        tridiagonal_solve([1.0, 1.0], [2.0, 2.0], [1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        TridiagonalFactor([1.0], [2.0, 2.0], [1.0]).solve([1.0, 2.0, 3.0])


def test_factor_reuse_matches_fresh_solve():
    rng = np.random.default_rng(3)
    sub, sup = rng.uniform(-1, 0, 9), rng.uniform(-1, 0, 9)
    diag = 3 + rng.uniform(size=10)
    fac = TridiagonalFactor(sub, diag, sup)
    for _ in range(3):
        rhs = rng.normal(size=10)
        np.testing.assert_array_equal(fac.solve(rhs), tridiagonal_solve(sub, diag, sup, rhs))


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 60), seed=st.integers(0, 2 ** 32 - 1))
def test_diagonally_dominant_systems(n, seed):
    rng = np.random.default_rng(seed)
    sub, sup = rng.uniform(-1, 1, n - 1), rng.uniform(-1, 1, n - 1)
    diag = (np.abs(np.r_[sub, 0]) + np.abs(np.r_[0, sup]) + 0.1) * rng.choice([-1, 1], n)
    rhs = rng.normal(size=n)
    x = tridiagonal_solve(sub, diag, sup, rhs)
    assert np.max(np.abs(dense(sub, diag, sup) @ x - rhs)) < 1e-10
