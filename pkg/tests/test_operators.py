from __future__ import annotations

import numpy as np
import pytest

from oracles import heis_product, left_invariant_fields, sphere_riemannian_hessian
from qcgeom.biquard import Geometry
from qcgeom.errors import UsageError
from qcgeom.jet import value_of
from qcgeom.models import HeisenbergModel, SphereModel, horizontal_frame
from qcgeom.operators import (
    INTEGRAL_IDENTITIES,
    FieldCalculus,
    ScalarField,
    TransportedIntegrand,
    direct_integrand,
    evaluate_fields,
    hess_decompose,
    hessian,
    mc_integrate,
    ricci_identity_residuals,
    riemannian_hessian,
    sublaplacian,
    volume_ratio,
    worker_count,
)


def _full_frame(model, x):
    fd = horizontal_frame(model, x)
    return np.concatenate([fd.horiz, fd.xi]), fd


def _left_invariant_second_derivatives(f, y, n, h=1e-4):
    """``K[i, j] = X_i X_j f(y)`` for left-invariant ``X``, by central differences."""
    m = y.size
    K = np.empty((m, m))
    E = np.eye(m) * h
    ev = lambda z: float(evaluate_fields([f], z[None])[0, 0])  # noqa: E731
    for i in range(m):
        for j in range(m):
            vals = [ev(heis_product(heis_product(y, a * E[i], n), b * E[j], n)) for a in (1, -1) for b in (1, -1)]
            K[i, j] = (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * h * h)
    return K


def test_heisenberg_hessian_matches_left_invariant_oracle(rng):
    M = HeisenbergModel(1)
    f = ScalarField.random("cubic", M.dim, 7)
    y = 0.5 * rng.normal(size=M.dim)
    K = _left_invariant_second_derivatives(f, y, 1)
    E, _ = _full_frame(M, y)
    coeff = np.linalg.solve(left_invariant_fields(y, 1), E.T)  # columns: frame in the invariant basis
    want = coeff.T @ K @ coeff
    assert np.allclose(hessian(M, f, y).full, want, atol=1e-5)


def test_sphere_riemannian_hessian_matches_ambient_formula(rng):
    M = SphereModel(2)
    f = ScalarField.random("cubic", M.dim, 3)
    for x in M.sample(rng, 3):
        grad = f.c1 + 2 * f.c2 @ x + 3 * np.einsum("ijk,j,k->i", f.c3, x, x)
        hess = 2 * f.c2 + 6 * np.einsum("ijk,k->ij", f.c3, x)
        E, _ = _full_frame(M, x)
        want = np.array([[sphere_riemannian_hessian(grad, hess, x, u, v) for v in E] for u in E])
        assert np.allclose(riemannian_hessian(M, f, x), want, atol=1e-10)


def test_coordinates_are_sublaplacian_eigenfunctions(rng):
    M = SphereModel(1)
    x = M.sample(rng, 1)[0]
    for i in range(M.dim):
        f = ScalarField.coordinate(M.dim, i)
        assert sublaplacian(M, f, x) == pytest.approx(4 * x[i], abs=1e-12)


def test_hessian_decomposition_reassembles(rng):
    M = SphereModel(2)
    f = ScalarField.random("quadratic", M.dim, 11)
    x = M.sample(rng, 1)[0]
    hd = hessian(M, f, x)
    _, fd = _full_frame(M, x)
    p3, pm, p30 = hess_decompose(hd, fd)
    assert np.allclose(p3 + pm, 0.5 * (hd.hh + hd.hh.T))
    assert abs(np.trace(p30)) < 1e-12


@pytest.fixture(scope="module")
def cubic_calculus():
    M = SphereModel(2)
    geo = Geometry(M, M.sample(np.random.default_rng(2), 2), order=3)
    fields = [ScalarField.random("cubic", M.dim, s) for s in range(2)]
    return geo, fields


def test_ricci_identities_hold(cubic_calculus):
    geo, fields = cubic_calculus
    res = ricci_identity_residuals(FieldCalculus(geo, fields))
    scale = 1 + np.abs(value_of(FieldCalculus(geo, fields).nab3)).max()
    for name, r in res.items():
        assert np.abs(r).max() / scale < 1e-9, name


def test_ricci_identity_detects_missing_curvature(cubic_calculus):
    geo, fields = cubic_calculus
    broken = Geometry(geo.model, geo.points, order=3)
    broken.__dict__["R"] = broken.R * 0.0
    res = ricci_identity_residuals(FieldCalculus(broken, fields))
    assert np.abs(res["third-horizontal-skew"]).max() > 1e-2


def test_order_requirements():
    M = SphereModel(2)
    fc = FieldCalculus(Geometry(M, M.base_point()[None], 2), [ScalarField.coordinate(M.dim, 0)])
    with pytest.raises(UsageError):
        fc.nab3
    with pytest.raises(UsageError):
        ricci_identity_residuals(fc)
    with pytest.raises(UsageError):
        FieldCalculus(fc.geo, [ScalarField.coordinate(5, 0)])


def test_scalar_field_json_and_transform(rng):
    f = ScalarField.random("cubic", 7, 19)
    assert ScalarField.from_json(f.to_json()).to_json() == f.to_json()
    g = ScalarField("quadratic", 0.5, rng.normal(size=3), np.eye(3))
    h = ScalarField.from_json(g.to_json())
    assert np.array_equal(h.c2, g.c2) and h.c3 is None
    L = np.linalg.qr(rng.normal(size=(7, 7)))[0]
    x = rng.normal(size=(4, 7))
    assert np.allclose(
        evaluate_fields([f.transformed(L)], x), evaluate_fields([f], x @ L.T), atol=1e-12
    )
    with pytest.raises(UsageError):
        ScalarField.random("quartic", 3, 0)


def test_transported_integrand_matches_direct(rng):
    M = SphereModel(1)
    f = ScalarField.random("quadratic", M.dim, 4)
    pts = M.sample(rng, 4)
    for name in ("divergence", "reeb-mix"):
        q, order = INTEGRAL_IDENTITIES[name]
        a = TransportedIntegrand(M, f, q, order)(pts)
        b = direct_integrand(M, f, q, order)(pts)
        assert np.allclose(a, b, atol=1e-10), name


def _sq(points):
    return points[:, 0] ** 2


def test_mc_is_deterministic_and_worker_independent(monkeypatch):
    M = SphereModel(1)
    a = mc_integrate(M, _sq, 2500, seed=9, chunk=500, workers=1)
    b = mc_integrate(M, _sq, 2500, seed=9, chunk=500, workers=3)
    assert a == b
    monkeypatch.setenv("QCGEOM_THREADS", "2")
    assert worker_count() == 2
    assert mc_integrate(M, _sq, 2500, seed=9, chunk=500) == a
    assert mc_integrate(M, _sq, 2500, seed=10, chunk=500) != a
    # E[x_0^2] on S^7 is 1/8
    assert abs(a.estimate - 1 / 8) < 5 * a.stderr


def test_mc_rejects_bad_input(monkeypatch):
    with pytest.raises(UsageError):
        mc_integrate(HeisenbergModel(1), _sq, 100, 0)
    with pytest.raises(UsageError):
        mc_integrate(SphereModel(1), _sq, 1, 0)
    monkeypatch.setenv("QCGEOM_THREADS", "many")
    assert worker_count() == 1


def test_volume_ratio_is_constant(rng):
    M = SphereModel(2)
    r = volume_ratio(Geometry(M, M.sample(rng, 3), 2))
    assert np.allclose(r, r.flat[0])
