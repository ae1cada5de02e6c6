from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import quat_left_matrix, quat_right_matrix
from qcgeom.errors import ZeroDivisor
from qcgeom.jet import seed, value_of
from qcgeom.quat import (
    BASIS,
    I,
    J,
    K,
    ONE,
    ImQuaternion,
    Quaternion,
    qinv,
    qmul,
    qvec_from_array,
    qvec_herm,
    qvec_lmul,
    qvec_norm2,
    qvec_to_array,
)

finite = st.floats(-10, 10, allow_nan=False)
quats = st.tuples(finite, finite, finite, finite).map(lambda t: Quaternion(*t))


def arr(q: Quaternion) -> np.ndarray:
    return np.array(q.components, dtype=float)


def test_unit_table():
    assert qmul(I, J) == K
    assert qmul(J, K) == I
    assert qmul(K, I) == J
    assert qmul(J, I) == -K
    for u in (I, J, K):
        assert qmul(u, u) == -ONE


def matrix_worst_error(cases: int = 1000, seed_: int = 3) -> float:
    """Largest gap between quaternion products and both 4x4 matrix representations."""
    rng = np.random.default_rng(seed_)
    a = rng.normal(size=(cases, 4))
    b = rng.normal(size=(cases, 4))
    got = np.stack(qmul(Quaternion.from_array(a), Quaternion.from_array(b)).components, axis=-1)
    left = np.einsum("kij,kj->ki", np.array([quat_left_matrix(x) for x in a]), b)
    right = np.einsum("kij,kj->ki", np.array([quat_right_matrix(y) for y in b]), a)
    return float(max(np.abs(got - left).max(), np.abs(got - right).max()))


def test_product_matches_matrix_representation():
    assert matrix_worst_error() <= 1e-13


@given(quats, quats, quats)
def test_associative(a, b, c):
    lhs = arr(qmul(qmul(a, b), c))
    rhs = arr(qmul(a, qmul(b, c)))
    assert np.allclose(lhs, rhs, atol=1e-9 * (1 + np.abs(lhs).max()))


@given(quats, quats)
def test_norm_is_multiplicative(a, b):
    assert np.isclose(float(qmul(a, b).norm2()), float(a.norm2()) * float(b.norm2()), rtol=1e-12, atol=1e-12)


@given(quats, quats)
def test_conjugation_reverses_products(a, b):
    assert np.allclose(arr(qmul(a, b).conj()), arr(qmul(b.conj(), a.conj())), atol=1e-10)


@given(quats.filter(lambda q: float(q.norm2()) > 1e-6))
def test_inverse(a):
    assert np.allclose(arr(qmul(a, qinv(a))), [1, 0, 0, 0], atol=1e-12)
    assert np.allclose(arr(qmul(qinv(a), a)), [1, 0, 0, 0], atol=1e-12)


def test_inverse_examples():
    assert arr(qinv(Quaternion.real(2.0))) == pytest.approx([0.5, 0, 0, 0])
    assert arr(qinv(I)) == pytest.approx(arr(-I))


def test_zero_inverse_raises():
    with pytest.raises(ZeroDivisor):
        qinv(Quaternion(0.0, 0.0, 0.0, 0.0))


def test_imaginary_part_and_operators():
    q = Quaternion(1.0, 2.0, 3.0, 4.0)
    assert q.im == ImQuaternion(2.0, 3.0, 4.0)
    assert (q.im + q.im).components == (4.0, 6.0, 8.0)
    assert (q - q).components == (0.0, 0.0, 0.0, 0.0)
    assert (2.0 * q).components == (2.0, 4.0, 6.0, 8.0)
    assert float(q.im.norm2()) == 29.0
    assert (q * I).components == qmul(q, I).components


def test_vectorized_components():
    a = np.arange(12.0).reshape(3, 4)
    q = Quaternion.from_array(a)
    assert np.array_equal(q.to_array(), a)
    n2 = q.norm2()
    assert np.allclose(n2, (a * a).sum(axis=1))


def test_jet_components_differentiate_products():
    # d/dx (x i) * (x j) = 2x k at x = 3
    x = seed(np.array([3.0]), 1)[0]
    p = qmul(Quaternion(0.0, x, 0.0, 0.0), Quaternion(0.0, 0.0, x, 0.0))
    assert value_of(p.z) == pytest.approx(9.0)
    assert p.z.derivative((1,)) == pytest.approx(6.0)


def test_quaternion_vectors(rng):
    a = rng.normal(size=8)
    u = qvec_from_array(a, 2)
    assert np.allclose(np.asarray(qvec_to_array(u)), a)
    assert float(qvec_norm2(u)) == pytest.approx(a @ a)
    b = rng.normal(size=8)
    v = qvec_from_array(b, 2)
    assert float(qvec_herm(u, v).re) == pytest.approx(a @ b)
    lam = Quaternion(*rng.normal(size=4))
    scaled = qvec_lmul(lam, u)
    assert float(qvec_norm2(scaled)) == pytest.approx(float(lam.norm2()) * a @ a)


def test_basis_is_orthonormal():
    M = np.array([arr(b) for b in BASIS])
    assert np.array_equal(M, np.eye(4))
