from __future__ import annotations

import numpy as np
import pytest
import sympy as sp

from qcgeom.biquard import Geometry
from qcgeom.jet import seed, stack, value_of
from qcgeom.models import HeisenbergModel
from qcgeom.tensor import (
    TensorValue,
    batched_bracket,
    casimir,
    casimir_project,
    exterior_d,
    frame_casimir_bilinear,
    lie_bracket,
)

X = sp.symbols("x0:3")
A_EXPR = [X[1] ** 2, X[0] * X[2], sp.Integer(1) + X[0] ** 3]
B_EXPR = [X[2], X[0] ** 2 * X[1], X[1] * X[2]]


def _field(exprs):
    def f(x):
        x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
        env = {"x0": x0, "x1": x1, "x2": x2}
        comps = [eval(str(e), {}, env) if e.free_symbols else float(e) + 0 * x0 for e in exprs]
        return stack(comps, axis=-1)

    return f


def test_lie_bracket_matches_symbolic():
    p = np.array([0.3, -1.2, 0.7])
    want = [
        sum(A_EXPR[k] * sp.diff(B_EXPR[i], X[k]) - B_EXPR[k] * sp.diff(A_EXPR[i], X[k]) for k in range(3))
        for i in range(3)
    ]
    want = np.array([float(w.subs(dict(zip(X, p)))) for w in want])
    got = lie_bracket(_field(A_EXPR), _field(B_EXPR), p)
    assert np.allclose(got, want, atol=1e-12)


def test_exterior_d_matches_finite_differences(rng):
    sigma = _field(A_EXPR)
    p = rng.normal(size=3)
    h = 1e-6
    J = np.empty((3, 3))
    for i in range(3):
        e = np.eye(3)[i] * h
        J[:, i] = (value_of(sigma(p + e)) - value_of(sigma(p - e))) / (2 * h)
    got = exterior_d(sigma, p)
    assert np.allclose(got, J.T - J, atol=1e-7)
    assert np.allclose(got, -got.T)


def test_exact_forms_are_closed(rng):
    def grad_of_cubic(x):
        x0, x1, x2 = x[..., 0], x[..., 1], x[..., 2]
        return stack([3 * x0 * x0 * x1, x0 * x0 * x0 + x2, x1], axis=-1)

    assert np.abs(exterior_d(grad_of_cubic, rng.normal(size=3))).max() < 1e-13


def test_constant_forms_have_zero_differential():
    assert np.array_equal(exterior_d(lambda x: np.ones(3), np.zeros(3)), np.zeros((3, 3)))


def test_batched_bracket_agrees_with_pointwise(rng):
    p = rng.normal(size=(2, 3))
    x = seed(p, 1)
    fa, fb = _field(A_EXPR), _field(B_EXPR)
    a = stack([fa(x), fb(x)], axis=1)
    br = value_of(batched_bracket(a, a))
    for k in range(2):
        assert np.allclose(br[k, 0, 1], lie_bracket(fa, fb, p[k]), atol=1e-12)
        assert np.allclose(br[k, 0, 0], 0)


@pytest.fixture(scope="module")
def structures():
    M = HeisenbergModel(2)
    return value_of(Geometry(M, M.base_point()[None], order=2).cs)[0]


def test_structures_form_a_quaternionic_triple(structures):
    I1, I2, I3 = structures
    assert np.allclose(I1 @ I1, -np.eye(8))
    assert np.allclose(I1 @ I2, I3)


def test_casimir_eigenparts(structures, rng):
    psi = rng.normal(size=(8, 8))
    dec = casimir_project(psi, structures)
    assert np.allclose(dec.part3 + dec.partMinus1, psi)
    assert np.allclose(casimir(dec.part3, structures), 3 * dec.part3, atol=1e-12)
    assert np.allclose(casimir(dec.partMinus1, structures), -dec.partMinus1, atol=1e-12)
    assert np.allclose(casimir(np.eye(8), structures), 3 * np.eye(8))
    assert np.allclose(casimir(structures[0], structures), -structures[0])


def test_bilinear_casimir_matches_endomorphism_form(structures, rng):
    psi = rng.normal(size=(8, 8))
    # B(X, Y) = g(Psi X, Y) has frame matrix Psi^T
    got = frame_casimir_bilinear(psi.T, structures)
    assert np.allclose(got, casimir(psi, structures).T, atol=1e-12)


def test_tensor_value_shape_validation():
    TensorValue(2, np.zeros((3, 3)), np.zeros(3))
    with pytest.raises(ValueError):
        TensorValue(2, np.zeros((3, 4)), np.zeros(3))
    with pytest.raises(ValueError):
        TensorValue(3, np.zeros((3, 3)), np.zeros(3))
