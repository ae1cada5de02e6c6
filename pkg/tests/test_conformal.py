from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

import qcgeom.conformal as cf
from qcgeom.biquard import Geometry
from qcgeom.errors import FitError, SingularityError, UsageError
from qcgeom.models import HeisenbergModel, HeisPoint, SphereModel, SpherePoint
from qcgeom.quat import Quaternion


def test_cayley_examples():
    x = np.zeros(8)
    x[0] = 1.0
    want = np.zeros(7)
    want[0] = 1.0
    assert np.allclose(cf.cayley_coords(x), want)
    assert np.allclose(cf.cayley2_coords(x), -want)
    y = np.zeros(7)
    y[4] = 1.0
    assert np.allclose(cf.inversion_coords(y), -y)


def test_point_typed_maps(rng):
    S = SphereModel(1)
    x = SpherePoint.from_array(S.sample(rng, 1)[0])
    y = cf.cayley(x)
    assert isinstance(y, HeisPoint)
    back = cf.cayley_inv(y)
    assert np.allclose(back.to_array(), x.to_array(), atol=1e-12)
    assert np.allclose(cf.inversion(cf.inversion(y)).to_array(), y.to_array(), atol=1e-10)
    assert isinstance(cf.cayley2(x), HeisPoint)


def test_cayley_round_trips(rng):
    S, H = SphereModel(2), HeisenbergModel(2)
    for x in S.sample(rng, 20):
        assert np.allclose(cf.cayley_inv_coords(cf.cayley_coords(x)), x, atol=1e-12)
    for y in H.sample(rng, 20):
        assert np.allclose(cf.cayley_coords(cf.cayley_inv_coords(y)), y, atol=1e-10)


def test_inversion_is_cayley_pair_and_involution(rng):
    H = HeisenbergModel(1)
    sigma = cf.compose(cf.cayley_inv_coords, cf.cayley2_coords)
    for y in H.sample(rng, 20, avoid_origin=True):
        assert np.allclose(sigma(y), cf.inversion_coords(y), atol=1e-10)
        assert np.allclose(cf.inversion_coords(cf.inversion_coords(y)), y, atol=1e-10)


def test_poles_raise():
    x = np.zeros(8)
    x[4] = -1.0
    with pytest.raises(SingularityError):
        cf.cayley_coords(x)
    with pytest.raises(SingularityError):
        cf.cayley2_coords(-x)
    with pytest.raises(SingularityError):
        cf.inversion_coords(np.zeros(7))
    with pytest.raises(UsageError):
        cf.dilation_coords(0.0)


def test_parse_pipeline(rng):
    a = rng.normal(size=7)
    y = rng.normal(size=7)
    text = "translate(" + ",".join(repr(float(v)) for v in a) + ") | invert | dilate(2)"
    got = cf.parse_pipeline(text, 1)(y)
    want = cf.compose(cf.translation_coords(a), cf.inversion_coords, cf.dilation_coords(2.0))(y)
    assert np.array_equal(got, want)
    assert np.array_equal(cf.parse_pipeline("identity", 1)(y), y)
    for bad in ("translate(1,2)", "dilate", "invert(1)", "spin", "dilate(x)", "dilate(-1)", "a b"):
        with pytest.raises(UsageError):
            cf.parse_pipeline(bad, 1)


@given(arrays(np.float64, 4, elements=st.floats(-1, 1)).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_rotor_matrix_round_trip(v):
    lam = Quaternion(*(v / np.linalg.norm(v)))
    back = np.array(cf.rotor_from_matrix(cf.rotation_of(lam)).components)
    want = np.array(lam.components)
    # v -> conj(lam) v lam fixes lam only up to sign
    assert min(np.abs(back - want).max(), np.abs(back + want).max()) < 1e-9
    assert back[0] >= 0


def test_inversion_certificate_and_conjugate_rotor(rng):
    H = HeisenbergModel(2)
    for y in H.sample(rng, 5, avoid_origin=True):
        cert = cf.pullback_certificate(cf.inversion_coords, cf.group_forms, cf.group_forms, y)
        f, mu = cf.inversion_expected(y)
        assert cert.passes(1e-9)
        assert cert.factor == pytest.approx(f, rel=1e-9)
        # the fitted rotor is the conjugate of the closed-form one
        assert np.allclose(cert.rotor.components, cf.canonical(mu.conj()).components, atol=1e-8)


def test_cayley_certificate(rng):
    H = HeisenbergModel(1)
    for y in H.sample(rng, 5):
        cert = cf.pullback_certificate(cf.cayley_inv_coords, cf.group_forms, cf.sphere_forms(1.0), y, False)
        f, lam = cf.cayley_expected(y)
        assert cert.factor == pytest.approx(f, rel=1e-9)
        assert np.allclose(cert.rotor.components, cf.canonical(lam.conj()).components, atol=1e-8)


def test_generic_rotor_is_not_self_conjugate():
    y = np.array([0.3, -0.5, 0.2, 0.7, 0.4, -0.1, 0.6])
    _, mu = cf.inversion_expected(y)
    R1, R2 = cf.rotation_of(mu), cf.rotation_of(mu.conj())
    assert np.abs(R1 - R2).max() > 0.1


def test_sphere_to_group_certificate_uses_tangent_space(rng):
    x = SphereModel(1).sample(rng, 1)[0]
    cert = cf.pullback_certificate(cf.cayley_coords, cf.sphere_forms(1.0), cf.group_forms, x)
    assert cert.passes(1e-9) and cert.factor > 0


def test_non_conformal_map_is_rejected(rng):
    stretch = np.array([2.0, 1, 1, 1, 1, 1, 1])
    with pytest.raises(FitError):
        cf.pullback_certificate(lambda y: y * stretch, cf.group_forms, cf.group_forms, rng.normal(size=7))


def test_liouville_factor():
    p = cf.LiouvilleParams(1.0, 1.0, np.zeros((1, 4)), np.zeros(3))
    assert cf.liouville_mu(p, np.zeros(7)) == 1.0
    with pytest.raises(UsageError):
        cf.LiouvilleParams(-1.0, 0.0, np.zeros((1, 4)), np.zeros(3))
    v = p.to_vector()
    assert np.array_equal(cf.LiouvilleParams.from_vector(v, 1).to_vector(), v)


def test_liouville_fit_recovers_synthetic_factor(rng):
    true = cf.LiouvilleParams(0.7, 0.0, rng.normal(size=(1, 4)) * 0.3, rng.normal(size=3) * 0.3)
    pts = rng.normal(size=(40, 7))
    vals = np.array([cf.liouville_mu(true, y) for y in pts])
    fit = cf.fit_liouville(pts, vals, 1)
    assert fit.residual < 1e-9
    assert fit.params.c0 == pytest.approx(0.7, rel=1e-6)
    assert abs(fit.params.sigma) < 1e-6


def test_wqc_needs_the_unit_sphere_normalization():
    M = SphereModel(1, "paper")
    geo = Geometry(M, M.base_point()[None], 3)
    with pytest.raises(UsageError):
        cf.wqc(geo, 0, 0, 1, 1, 0)
    U = SphereModel(1)
    assert abs(cf.wqc(Geometry(U, U.base_point()[None], 3), 0, 0, 1, 1, 0)) < 1e-9
