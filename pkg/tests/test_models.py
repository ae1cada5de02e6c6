from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oracles import heis_product
from qcgeom.errors import DomainError, UsageError
from qcgeom.jet import seed, value_of
from qcgeom.models import (
    HeisenbergModel,
    HeisPoint,
    QCModel,
    SphereModel,
    SpherePoint,
    dilate_coords,
    dilation,
    eta_forms,
    frame_fields,
    gauge_norm,
    group_inverse,
    group_mul,
    heis_mul_coords,
    horizontal_frame,
    make_model,
    reeb_solve,
    sphere_eta_coords,
    theta_coords,
    theta_forms,
)

heis2 = arrays(np.float64, 11, elements=st.floats(-2, 2, allow_nan=False))


@given(heis2, heis2)
def test_group_law_matches_matrix_oracle(a, b):
    assert np.allclose(heis_mul_coords(a, b, 2), heis_product(a, b, 2), atol=1e-12)


@given(heis2, heis2, heis2)
def test_group_is_associative(a, b, c):
    lhs = heis_mul_coords(heis_mul_coords(a, b, 2), c, 2)
    rhs = heis_mul_coords(a, heis_mul_coords(b, c, 2), 2)
    assert np.allclose(lhs, rhs, atol=1e-10)


def test_group_example():
    a = HeisPoint(np.array([[1.0, 0, 0, 0]]), np.zeros(3))
    b = HeisPoint(np.array([[0, 1.0, 0, 0]]), np.zeros(3))
    c = group_mul(a, b)
    # 2 Im(1 * conj(i)) = -2i
    assert c.q.tolist() == [[1.0, 1.0, 0.0, 0.0]]
    assert c.omega.tolist() == [-2.0, 0.0, 0.0]


def test_inverse_and_dilation(rng):
    x = HeisPoint.from_array(rng.normal(size=7))
    e = group_mul(x, group_inverse(x))
    assert np.abs(e.to_array()).max() < 1e-14
    t = 1.9
    assert gauge_norm(dilation(x, t)) == pytest.approx(t * gauge_norm(x))
    y = HeisPoint.from_array(rng.normal(size=7))
    lhs = dilation(group_mul(x, y), t).to_array()
    rhs = group_mul(dilation(x, t), dilation(y, t)).to_array()
    assert np.allclose(lhs, rhs)


def test_gauge_norm_example():
    x = HeisPoint(np.array([[3.0, 0, 0, 0]]), np.array([0.0, 0.0, 0.0]))
    assert gauge_norm(x) == pytest.approx(3.0)
    w = HeisPoint(np.zeros((1, 4)), np.array([16.0, 0.0, 0.0]))
    assert gauge_norm(w) == pytest.approx(4.0)


def test_theta_at_origin_is_half_domega():
    th = theta_forms(HeisPoint(np.zeros((2, 4)), np.zeros(3)))
    want = np.zeros((3, 11))
    want[:, 8:] = 0.5 * np.eye(3)
    assert np.array_equal(th, want)


@given(heis2, heis2)
def test_theta_is_left_invariant(a, y):
    moved = heis_mul_coords(a, seed(y, 1), 2)
    J = value_of(moved.grad())
    pulled = value_of(theta_coords(value_of(moved), 2)) @ J
    assert np.allclose(pulled, value_of(theta_coords(y, 2)), atol=1e-10)


def test_sphere_forms_example_at_pole():
    p = SpherePoint(np.array([[0.0, 0, 0, 0], [1.0, 0, 0, 0]]))
    eta = eta_forms(p, "paper")
    want = np.zeros((3, 8))
    want[:, 5:] = 2 * np.eye(3)
    assert np.allclose(eta, want)
    assert np.allclose(eta_forms(p), 0.5 * want)


def test_sphere_forms_kill_the_radial_direction(rng):
    M = SphereModel(2)
    x = M.sample(rng, 20)
    eta = np.asarray(sphere_eta_coords(x, 2))
    assert np.abs(np.einsum("psm,pm->ps", eta, x)).max() < 1e-14


def test_sphere_point_validation():
    with pytest.raises(DomainError):
        SpherePoint(np.ones((2, 4)))
    eta_forms(SpherePoint.from_array(np.eye(8)[0]), "paper")
    with pytest.raises(DomainError):
        eta_forms(SpherePoint(np.full((2, 4), 0.5 + 1e-6)))
    with pytest.raises(UsageError):
        eta_forms(SpherePoint.from_array(np.eye(8)[0]), "unit")
    with pytest.raises(UsageError):
        SpherePoint.from_array(np.ones(6))
    with pytest.raises(UsageError):
        HeisPoint.from_array(np.ones(6))


def test_model_construction_errors():
    with pytest.raises(UsageError):
        make_model("torus", 2)
    with pytest.raises(UsageError):
        HeisenbergModel(4)
    with pytest.raises(UsageError):
        SphereModel(2, "other")
    with pytest.raises(UsageError):
        SphereModel(2).validate(np.zeros(11))


@pytest.mark.parametrize("name", ["heisenberg", "sphere"])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_calibration_is_one(name, n):
    # the Sasakian sphere and the flat group already satisfy I_s^2 = -1
    assert make_model(name, n).calibration == pytest.approx(1.0, abs=1e-12)


def test_doubled_sphere_normalization_is_homothetic():
    assert SphereModel(1, "paper").calibration == pytest.approx(2.0, abs=1e-12)


@pytest.mark.parametrize("name", ["heisenberg", "sphere"])
def test_frame_data_is_orthonormal_and_satisfies_reeb_conditions(name, rng):
    M = make_model(name, 2)
    x = M.sample(rng, 1)[0]
    fd = horizontal_frame(M, x)
    assert np.allclose(fd.g, np.eye(8), atol=1e-12)
    assert np.allclose(fd.eta @ fd.xi.T, np.eye(3), atol=1e-12)
    assert np.abs(fd.eta @ fd.horiz.T).max() < 1e-12
    for s in range(3):
        assert np.abs(fd.xi[s] @ fd.deta[s] @ fd.horiz.T).max() < 1e-12
    E = np.concatenate([fd.horiz, fd.xi])
    assert np.allclose(E @ fd.h @ E.T, np.eye(11), atol=1e-12)
    assert np.allclose(reeb_solve(M, x), fd.xi)


def test_frame_pivots_can_be_frozen(rng):
    M = SphereModel(2)
    x = M.sample(rng, 4)
    fr = frame_fields(M, seed(x, 1))
    again = frame_fields(M, seed(x, 1), pivots=fr.pivots)
    assert np.array_equal(value_of(fr.horiz), value_of(again.horiz))
    with pytest.raises(UsageError):
        frame_fields(M, x)


def test_sphere_isometries_preserve_the_forms(rng):
    M = SphereModel(2)
    for x in M.sample(rng, 10):
        L = M.isometry_to(x)
        assert np.allclose(L.T @ L, np.eye(12), atol=1e-12)
        assert np.allclose(L @ M.base_point(), x, atol=1e-12)
        y = M.sample(rng, 1)[0]
        lhs = np.asarray(sphere_eta_coords(L @ y, 2)) @ L
        assert np.allclose(lhs, np.asarray(sphere_eta_coords(y, 2)), atol=1e-12)


def test_point_json_round_trip(rng):
    M = SphereModel(1)
    x = M.sample(rng, 1)[0]
    model, y = QCModel.point_from_json(M.point_json(x))
    assert model.name == "sphere" and model.n == 1
    assert np.array_equal(x, y)


def test_dilate_coords_scales_weights():
    x = np.arange(7.0)
    y = dilate_coords(x, 2.0, 1)
    assert y[:4].tolist() == [0.0, 2.0, 4.0, 6.0]
    assert y[4:].tolist() == [16.0, 20.0, 24.0]
