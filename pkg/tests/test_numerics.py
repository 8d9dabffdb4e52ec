import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ivbandits.errors import DimensionMismatch, NotPSD
from ivbandits.numerics import (cho_factor_jitter, extreme_singular_values, mahalanobis_sq, sigma_min,
                                solve_psd, unit_vector)


@pytest.mark.parametrize("A,b,x", [
    (np.eye(2), [3, 5], [3, 5]),
    (np.diag([2.0, 4.0]), [2, 4], [1, 1]),
    ([[2.0, 1.0], [1.0, 2.0]], [3, 3], [1, 1]),
])
def test_solve_psd_examples(A, b, x):
    np.testing.assert_allclose(solve_psd(A, b), x, atol=1e-12)


def test_solve_psd_residual_bound(rng):
    M = rng.normal(size=(5, 5))
    A = M @ M.T + 0.1 * np.eye(5)
    b = rng.normal(size=5)
    x = solve_psd(A, b)
    assert np.max(np.abs(A @ x - b)) <= 1e-8 * (1 + np.max(np.abs(b)))


def test_solve_psd_jitter_rescues_semidefinite():
    # rank-one PSD: plain Cholesky fails, the jittered one succeeds
    A = np.array([[1.0, 1.0], [1.0, 1.0]])
    cho_factor_jitter(A)


def test_solve_psd_errors():
    with pytest.raises(NotPSD):
        solve_psd([[1.0, 0.0], [0.0, -1.0]], [1, 1])
    with pytest.raises(NotPSD):
        solve_psd([[1.0, 2.0], [0.0, 1.0]], [1, 1])
    with pytest.raises(DimensionMismatch):
        solve_psd(np.eye(2), [1, 2, 3])
    with pytest.raises(DimensionMismatch):
        solve_psd(np.ones((2, 3)), [1, 2])


@pytest.mark.parametrize("v,A,val", [
    ([1, 0], np.eye(2), 1.0),
    ([1, 1], 2 * np.eye(2), 1.0),
    ([1, -1], [[2.0, 1.0], [1.0, 2.0]], 2.0),
])
def test_mahalanobis_examples(v, A, val):
    assert mahalanobis_sq(v, A) == pytest.approx(val, rel=1e-12)


def test_mahalanobis_rows_match_explicit_inverse(rng):
    M = rng.normal(size=(4, 4))
    A = M @ M.T + np.eye(4)
    V = rng.normal(size=(7, 4))
    expected = np.einsum("ij,jk,ik->i", V, np.linalg.inv(A), V)
    np.testing.assert_allclose(mahalanobis_sq(V, A), expected, rtol=1e-10)


@settings(max_examples=50, deadline=None)
@given(arrays(float, 3, elements=st.floats(-10, 10)))
def test_mahalanobis_nonnegative_and_zero_only_at_zero(v):
    A = np.array([[3.0, 1.0, 0.0], [1.0, 2.0, 0.5], [0.0, 0.5, 1.0]])
    m = mahalanobis_sq(v, A)
    assert m >= 0
    if np.allclose(v, 0):
        assert m == pytest.approx(0.0, abs=1e-12)
    else:
        assert m > 0


def test_mahalanobis_not_psd():
    with pytest.raises(NotPSD):
        mahalanobis_sq([1, 0], [[-1.0, 0.0], [0.0, 1.0]])


def test_extreme_singular_values_examples():
    assert extreme_singular_values(np.eye(3)) == pytest.approx((1.0, 1.0))
    assert extreme_singular_values(np.diag([3.0, 5.0])) == pytest.approx((3.0, 5.0))
    phi = (1 + np.sqrt(5)) / 2
    lo, hi = extreme_singular_values([[1.0, 1.0], [0.0, 1.0]])
    assert lo == pytest.approx(phi - 1, rel=1e-8)
    assert hi == pytest.approx(phi, rel=1e-8)


def test_extreme_singular_values_degenerate_and_accuracy(rng):
    assert sigma_min(np.zeros((3, 3))) == 0.0
    assert sigma_min(np.ones((2, 2))) == pytest.approx(0.0, abs=1e-12)
    # wide matrices have a nontrivial null space
    assert sigma_min(np.ones((2, 3))) == 0.0
    A = rng.normal(size=(5, 5))
    s = np.linalg.svd(A, compute_uv=False)
    lo, hi = extreme_singular_values(A)
    assert lo == pytest.approx(s[-1], rel=1e-8)
    assert hi == pytest.approx(s[0], rel=1e-8)
    # nearly singular: the SVD fallback keeps relative accuracy
    B = np.diag([1.0, 1e-9])
    assert sigma_min(B) == pytest.approx(1e-9, rel=1e-8)


def test_unit_vector():
    np.testing.assert_array_equal(unit_vector(3, 1), [0, 1, 0])
