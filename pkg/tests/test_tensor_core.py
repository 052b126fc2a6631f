import itertools

import numpy as np
import pytest

from utils.errors import DimensionMismatchError, InvalidInputError
from utils.tensor_core import (
    as_tensor,
    fold,
    frobenius_norm,
    hadamard,
    inner,
    khatri_rao,
    kronecker,
    mttkrp,
    multi_ttm,
    ttm,
    unfold,
)


def test_unfold_singleton():
    assert unfold(np.full((1, 1, 1), 5.0), 0).tolist() == [[5.0]]


def test_unfold_matrix_is_transpose_for_second_mode():
    t = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(unfold(t, 1), [[1.0, 3.0], [2.0, 4.0]])


def test_unfold_places_elements_by_column_formula(rng):
    t = rng.standard_normal((3, 2, 2))
    for mode in range(3):
        m = unfold(t, mode)
        assert m.shape == (t.shape[mode], t.size // t.shape[mode])
        others = [k for k in range(3) if k != mode]
        for index in itertools.product(*map(range, t.shape)):
            column, stride = 0, 1
            for k in others:
                column += index[k] * stride
                stride *= t.shape[k]
            assert m[index[mode], column] == t[index]


def test_fold_inverts_unfold(rng):
    t = rng.standard_normal((3, 2, 2))
    for mode in range(3):
        np.testing.assert_array_equal(fold(unfold(t, mode), mode, t.shape), t)


def test_fold_trivial_cases():
    assert fold(np.array([[7.0]]), 0, (1, 1)).tolist() == [[7.0]]
    assert not fold(np.zeros((2, 6)), 0, (2, 3, 2)).any()


def test_fold_rejects_wrong_size():
    with pytest.raises(DimensionMismatchError):
        fold(np.zeros((2, 5)), 0, (2, 3, 2))


def test_ttm_sums_along_mode():
    y = ttm(np.ones((2, 2, 2)), np.array([[1.0, 1.0]]), 0)
    assert y.shape == (1, 2, 2)
    assert np.all(y == 2.0)


def test_ttm_identity_is_noop(rng):
    t = rng.standard_normal((3, 4, 2))
    np.testing.assert_array_equal(ttm(t, np.eye(4), 1), t)


def test_ttm_matches_direct_summation(rng):
    t = rng.standard_normal((3, 4, 2))
    b = rng.standard_normal((5, 4))
    expected = np.zeros((3, 5, 2))
    for i, j, k, l in itertools.product(range(3), range(5), range(2), range(4)):
        expected[i, j, k] += b[j, l] * t[i, l, k]
    np.testing.assert_allclose(ttm(t, b, 1), expected, rtol=1e-14, atol=1e-14)


def test_ttm_rejects_wrong_extent(rng):
    with pytest.raises(DimensionMismatchError):
        ttm(rng.standard_normal((3, 4, 2)), np.eye(3), 1)


def test_multi_ttm_empty_and_bilinear(rng):
    t = rng.standard_normal((2, 2))
    assert multi_ttm(t, []) is t
    u, v = rng.standard_normal(2), rng.standard_normal(2)
    y = multi_ttm(t, [(0, u[None, :]), (1, v[None, :])])
    assert y.shape == (1, 1)
    assert y[0, 0] == pytest.approx(u @ t @ v, rel=1e-14)


def test_multi_ttm_matricization_identity(rng):
    t = rng.standard_normal((4, 3, 5))
    b0, b2 = rng.standard_normal((2, 4)), rng.standard_normal((3, 5))
    y = multi_ttm(t, [(0, b0), (2, b2)])
    np.testing.assert_allclose(unfold(y, 1), unfold(t, 1) @ np.kron(b2, b0).T, rtol=1e-12)


def test_multi_ttm_rejects_duplicate_modes(rng):
    with pytest.raises(InvalidInputError):
        multi_ttm(rng.standard_normal((2, 2)), [(0, np.eye(2)), (0, np.eye(2))])


def test_khatri_rao_known_values():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(khatri_rao([a]), a)
    np.testing.assert_array_equal(
        khatri_rao([a, np.eye(2)]), [[1, 0], [0, 2], [3, 0], [0, 4]]
    )
    np.testing.assert_array_equal(khatri_rao([np.eye(2), np.eye(2)]),
                                  [[1, 0], [0, 0], [0, 0], [0, 1]])


def test_khatri_rao_kronecker_identity(rng):
    a, b = rng.standard_normal((4, 3)), rng.standard_normal((5, 3))
    c, d = rng.standard_normal((2, 4)), rng.standard_normal((2, 5))
    np.testing.assert_allclose(kronecker(c, d) @ khatri_rao([a, b]),
                               khatri_rao([c @ a, d @ b]), rtol=1e-12, atol=1e-12)


def test_khatri_rao_rejects_column_mismatch():
    with pytest.raises(DimensionMismatchError):
        khatri_rao([np.eye(2), np.ones((2, 3))])


def test_kronecker_scalar_case(rng):
    b = rng.standard_normal((3, 2))
    np.testing.assert_array_equal(kronecker(np.array([[2.0]]), b), 2.0 * b)


def test_hadamard_and_inner():
    a = np.array([[1.0, 2.0], [3.0, 4.0]])
    np.testing.assert_array_equal(hadamard(a, a), [[1, 4], [9, 16]])
    assert inner(np.ones((2, 2, 2)), np.ones((2, 2, 2))) == 8.0
    with pytest.raises(DimensionMismatchError):
        hadamard(a, np.ones((2, 3)))


def test_frobenius_norm():
    assert frobenius_norm(np.zeros((2, 3))) == 0.0
    assert frobenius_norm(np.ones((2, 2, 2))) == pytest.approx(np.sqrt(8.0))


def test_mttkrp_matches_materialized_product(rng):
    t = rng.standard_normal((4, 3, 2))
    factors = [rng.standard_normal((d, 2)) for d in t.shape]
    for mode in range(3):
        np.testing.assert_allclose(mttkrp(t, factors, mode),
                                   mttkrp(t, factors, mode, materialize=True),
                                   rtol=1e-12, atol=1e-12)


def test_mttkrp_order_four(rng):
    t = rng.standard_normal((3, 4, 2, 3))
    factors = [rng.standard_normal((d, 3)) for d in t.shape]
    for mode in range(4):
        others = [k for k in range(4) if k != mode]
        expected = unfold(t, mode) @ khatri_rao([factors[k] for k in reversed(others)])
        np.testing.assert_allclose(mttkrp(t, factors, mode), expected, rtol=1e-12, atol=1e-12)


def test_as_tensor_validation():
    with pytest.raises(InvalidInputError):
        as_tensor(np.array([1.0, np.nan]))
    with pytest.raises(InvalidInputError):
        as_tensor(np.zeros((2, 0)))
    with pytest.raises(DimensionMismatchError):
        as_tensor(np.arange(5.0), (2, 3))
    assert as_tensor(range(6), (2, 3)).flags['C_CONTIGUOUS']
