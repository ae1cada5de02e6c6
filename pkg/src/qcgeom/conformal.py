"""Cayley transforms, the Heisenberg inversion and qc-conformality certificates.

Maps act on flat coordinates: sphere points are ``(q'_1..q'_n, p')`` in
``R^{4n+4}``, group points ``(q_1..q_n, omega)`` in ``R^{4n+3}``.  All
formulas are written with :mod:`qcgeom.quat` so they evaluate on jets,
which is how pullbacks of the contact forms are differentiated.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import least_squares
from scipy.spatial.transform import Rotation

from .biquard import Geometry
from .errors import FitError, SingularityError, UsageError
from .jet import Jet, seed, value_of
from .models import (
    HeisPoint,
    SpherePoint,
    dilate_coords,
    flat,
    gauge_norm_coords,
    heis_mul_coords,
    heis_split,
    quats,
    sphere_eta_coords,
    theta_coords,
)
from .quat import ImQuaternion, Quaternion, qinv, qmul

POLE_TOL = 1e-8
FIT_LIMIT = 1e-4

CoordMap = Callable[[object], object]


# -- Siegel adapter ------------------------------------------------------------------


def to_siegel(q, w: ImQuaternion) -> Quaternion:
    """``(q, omega) -> p = |q|^2 - omega``."""
    q2 = q[0].norm2()
    for a in q[1:]:
        q2 = q2 + a.norm2()
    return Quaternion(q2, -w.i, -w.j, -w.k)


def from_siegel(q, p: Quaternion):
    """Flat group coordinates from Siegel data; ``omega = -Im p``."""
    return flat(list(q) + [-p.im])


def _guard(a: Quaternion, what: str):
    if any(isinstance(c, Jet) for c in a.components):
        return
    if float(np.sqrt(np.sum(np.square(np.asarray(a.components, dtype=float))))) < POLE_TOL:
        raise SingularityError(what)


def _n_sphere(x) -> int:
    return (x.shape[-1] - 4) // 4


def _n_group(y) -> int:
    return (y.shape[-1] - 3) // 4


# -- coordinate maps ------------------------------------------------------------------


def cayley_coords(x):
    """Sphere minus ``p' = -1`` onto the group."""
    n = _n_sphere(x)
    qp = quats(x, 0, n)
    pp = quats(x, 4 * n, 1)[0]
    one_p = 1.0 + pp
    _guard(one_p, "Cayley transform at the pole p' = -1")
    inv = qinv(one_p)
    return from_siegel([qmul(inv, a) for a in qp], qmul(inv, 1.0 - pp))


def cayley_inv_coords(y):
    n = _n_group(y)
    q, w = heis_split(y, n)
    p = to_siegel(q, w)
    one_p = 1.0 + p
    _guard(one_p, "inverse Cayley transform with 1 + p = 0")
    inv = qinv(one_p)
    return flat([qmul(inv, a).scale(2.0) for a in q] + [qmul(inv, 1.0 - p)])


def cayley2_coords(x):
    """Sphere minus ``p' = 1`` onto the group."""
    n = _n_sphere(x)
    qp = quats(x, 0, n)
    pp = quats(x, 4 * n, 1)[0]
    one_m = 1.0 - pp
    _guard(one_m, "second Cayley transform at the pole p' = 1")
    inv = qinv(one_m)
    return from_siegel([-qmul(inv, a) for a in qp], qmul(inv, 1.0 + pp))


def inversion_coords(y):
    """``q* = -(|q|^2 - w)^{-1} q``, ``w* = -w / (|q|^4 + |w|^2)``."""
    n = _n_group(y)
    q, w = heis_split(y, n)
    if not isinstance(y, Jet) and float(gauge_norm_coords(np.asarray(y, dtype=float), n)) <= POLE_TOL:
        raise SingularityError("inversion at the origin")
    p = to_siegel(q, w)
    inv = qinv(p)
    n4 = p.norm2()
    return flat([-qmul(inv, a) for a in q] + [w.scale(-1.0 / n4)])


def translation_coords(shift) -> CoordMap:
    shift = np.asarray(shift, dtype=float)
    n = _n_group(shift)
    return lambda y: heis_mul_coords(shift, y, n)


def dilation_coords(t: float) -> CoordMap:
    if t <= 0:
        raise UsageError("dilation needs t > 0")
    return lambda y: dilate_coords(y, t, _n_group(y))


def compose(*maps: CoordMap) -> CoordMap:
    """Apply ``maps`` left to right."""

    def run(x):
        for f in maps:
            x = f(x)
        return x

    return run


# -- point-typed API ------------------------------------------------------------------


def _arr(p) -> np.ndarray:
    return np.asarray(p.to_array() if hasattr(p, "to_array") else p, dtype=float)


def cayley(p: SpherePoint) -> HeisPoint:
    return HeisPoint.from_array(cayley_coords(_arr(p)))


def cayley_inv(p: HeisPoint) -> SpherePoint:
    x = cayley_inv_coords(_arr(p))
    return SpherePoint(x.reshape(-1, 4))


def cayley2(p: SpherePoint) -> HeisPoint:
    return HeisPoint.from_array(cayley2_coords(_arr(p)))


def inversion(p: HeisPoint) -> HeisPoint:
    return HeisPoint.from_array(inversion_coords(_arr(p)))


# -- pipelines ----------------------------------------------------------------------------

_STEP = re.compile(r"^\s*([a-z_0-9]+)\s*(?:\((.*)\))?\s*$")


def parse_pipeline(text: str, n: int) -> CoordMap:
    """Parse ``"translate(v..)|invert|dilate(t)"``; steps run left to right.

    ``translate`` takes the ``4n+3`` flat coordinates of the shift.  Also
    understood: ``cayley``, ``cayley_inv``, ``cayley2``, ``identity``.
    """
    maps = []
    for raw in text.split("|"):
        m = _STEP.match(raw)
        if not m:
            raise UsageError(f"bad pipeline step {raw!r}")
        name, args = m.group(1), m.group(2)
        try:
            vals = [float(v) for v in args.split(",")] if args and args.strip() else []
        except ValueError as exc:
            raise UsageError(f"bad arguments in {raw!r}") from exc
        if name == "translate":
            if len(vals) != 4 * n + 3:
                raise UsageError(f"translate needs {4 * n + 3} numbers, got {len(vals)}")
            maps.append(translation_coords(vals))
        elif name == "dilate":
            if len(vals) != 1:
                raise UsageError("dilate takes one number")
            maps.append(dilation_coords(vals[0]))
        elif name in ("invert", "inversion"):
            maps.append(inversion_coords)
        elif name == "cayley":
            maps.append(cayley_coords)
        elif name == "cayley_inv":
            maps.append(cayley_inv_coords)
        elif name == "cayley2":
            maps.append(cayley2_coords)
        elif name == "identity":
            maps.append(lambda y: y)
        else:
            raise UsageError(f"unknown pipeline step {name!r}")
        if vals and name in ("invert", "inversion", "cayley", "cayley_inv", "cayley2", "identity"):
            raise UsageError(f"{name} takes no arguments")
    return compose(*maps)


# -- certificates -------------------------------------------------------------------------


@dataclass(frozen=True)
class ConformalCertificate:
    """``F^* target = factor * conj(rotor) . source . rotor`` at a point."""

    factor: float
    rotor: Quaternion
    residual: float

    def passes(self, tol: float) -> bool:
        return self.residual <= tol


def group_forms(y):
    return theta_coords(y, _n_group(y))


def sphere_forms(scale: float = 1.0):
    """Contact forms of the sphere; ``scale = 1`` is ``dq'.q̄' - q'.dq̄' + ...``."""
    return lambda x: sphere_eta_coords(x, _n_sphere(x), scale)


def _tangent_basis(p: np.ndarray, on_sphere: bool) -> np.ndarray:
    if not on_sphere:
        return np.eye(p.size)
    # orthonormal complement of the radial direction
    q, _ = np.linalg.qr(np.column_stack([p, np.eye(p.size)]))
    return q[:, 1:]


def rotor_from_matrix(R: np.ndarray) -> Quaternion:
    """Unit ``lam`` with ``R v = conj(lam) v lam`` on ``Im H``; real part made non-negative."""
    x, y, z, w = Rotation.from_matrix(R).as_quat()  # R v = q v q^-1
    lam = np.array([w, -x, -y, -z])
    if lam[0] < 0 or (lam[0] == 0 and next(c for c in lam[1:] if c != 0) < 0):
        lam = -lam
    return Quaternion(*lam)


def rotation_of(lam: Quaternion) -> np.ndarray:
    """Matrix of ``v -> conj(lam) v lam`` on ``Im H``."""
    out = np.empty((3, 3))
    for c in range(3):
        e = np.zeros(4)
        e[c + 1] = 1.0
        v = qmul(qmul(lam.conj(), Quaternion(*e)), lam)
        out[:, c] = [v.x, v.y, v.z]
    return out


def pullback_certificate(
    fmap: CoordMap,
    source_forms: Callable,
    target_forms: Callable,
    p,
    source_on_sphere: bool | None = None,
) -> ConformalCertificate:
    """Fit ``F^* target = factor * (conj(lam) . source . lam)`` on the tangent space at ``p``."""
    p = _arr(p)
    if source_on_sphere is None:
        source_on_sphere = p.size % 4 == 0
    y = fmap(seed(p, 1))
    J = value_of(y.grad())  # (m_target, m_source)
    A = np.asarray(value_of(target_forms(value_of(y))), dtype=float) @ J
    B = np.asarray(value_of(source_forms(p)), dtype=float)
    Tb = _tangent_basis(p, source_on_sphere)
    A, B = A @ Tb, B @ Tb
    U, s, Vt = np.linalg.svd(A @ B.T)
    d = np.sign(np.linalg.det(U @ Vt)) or 1.0
    D = np.diag([1.0, 1.0, d])
    R = U @ D @ Vt
    factor = float(np.sum(s * np.diag(D)) / np.sum(B * B))
    if not factor > 0:
        raise FitError("pullback is not a positive multiple of a rotated structure")
    residual = float(np.abs(A - factor * R @ B).max())
    if residual > FIT_LIMIT:
        raise FitError(f"map is not qc-conformal here (residual {residual:.3e})")
    return ConformalCertificate(factor, rotor_from_matrix(R), residual)


def cayley_expected(y) -> tuple[float, Quaternion]:
    """Factor ``8/|1+p|^2`` and rotor ``|1+p| (1+p)^{-1}`` for the inverse Cayley transform at ``y``."""
    y = _arr(y)
    q, w = heis_split(y, _n_group(y))
    one_p = 1.0 + to_siegel(q, w)
    nrm = float(one_p.norm())
    return 8.0 / nrm**2, qinv(one_p).scale(nrm)


def inversion_expected(y) -> tuple[float, Quaternion]:
    """Factor ``1/(|q|^4+|w|^2)`` and rotor ``(|q|^2 + w)/(|q|^4+|w|^2)^{1/2}``."""
    y = _arr(y)
    q, w = heis_split(y, _n_group(y))
    p = to_siegel(q, w)
    n4 = float(p.norm2())
    return 1.0 / n4, p.conj().scale(1.0 / np.sqrt(n4))


def canonical(lam: Quaternion) -> Quaternion:
    a = np.array(lam.components, dtype=float)
    return Quaternion(*(-a if a[0] < 0 else a))


# -- Liouville factor ---------------------------------------------------------------------


@dataclass(frozen=True)
class LiouvilleParams:
    c0: float
    sigma: float
    q0: np.ndarray  # (n, 4) quaternion components
    omega0: np.ndarray  # (3,) imaginary components

    def __post_init__(self):
        if not self.c0 > 0:
            raise UsageError("c0 must be positive")

    def to_vector(self) -> np.ndarray:
        return np.concatenate([[self.c0, self.sigma], np.ravel(self.q0), self.omega0])

    @classmethod
    def from_vector(cls, v, n: int) -> "LiouvilleParams":
        v = np.asarray(v, dtype=float)
        return cls(float(v[0]), float(v[1]), v[2 : 2 + 4 * n].reshape(n, 4), v[2 + 4 * n :])


def _liouville_raw(v: np.ndarray, y: np.ndarray, n: int) -> np.ndarray:
    c0, sig = v[0], v[1]
    shift = np.concatenate([v[2 : 2 + 4 * n], v[2 + 4 * n :]])
    z = heis_mul_coords(shift, y, n)  # (q + q0, w + w0 + 2 Im q0 conj(q))
    zq, zw = z[..., : 4 * n], z[..., 4 * n :]
    q2 = np.sum(zq * zq, axis=-1)
    return c0 * ((sig + q2) ** 2 + np.sum(zw * zw, axis=-1))


def liouville_mu(params: LiouvilleParams, p) -> float:
    y = _arr(p)
    return float(_liouville_raw(params.to_vector(), y, params.q0.shape[0]))


@dataclass(frozen=True)
class LiouvilleFit:
    params: LiouvilleParams
    residual: float


def fit_liouville(points: np.ndarray, values: np.ndarray, n: int, seed_: int = 0, restarts: int = 8) -> LiouvilleFit:
    """Least-squares fit of the quartic conformal factor to sampled values.

    The residual is the maximum deviation relative to ``1 + max |values|``.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    values = np.asarray(values, dtype=float)
    scale = 1.0 + np.abs(values).max()
    rng = np.random.default_rng(seed_)

    def res(v):
        return (_liouville_raw(v, points, n) - values) / scale

    best = None
    for k in range(restarts):
        v0 = np.concatenate([[np.abs(values).mean() + 0.1, 0.0], rng.normal(0.0, 0.5 if k else 0.0, 4 * n + 3)])
        sol = least_squares(res, v0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
        r = float(np.abs(sol.fun).max())
        if best is None or r < best[1]:
            best = (sol.x, r)
        if r < 1e-12:
            break
    v, r = best
    if v[0] <= 0:
        raise FitError("fitted c0 is not positive")
    return LiouvilleFit(LiouvilleParams.from_vector(v, n), r)


# -- qc-conformal curvature ----------------------------------------------------------------


def wqc_tensor(R: np.ndarray, cs: np.ndarray, omega: np.ndarray) -> np.ndarray:
    """Horizontal ``W^qc`` at ``T0 = U = 0, S = 2`` from curvature values ``R[x, y, z, v]``."""
    hd = cs.shape[-1]
    R = R[..., :hd, :hd, :hd, :hd]
    g = np.eye(hd)
    rot = np.einsum("...scx,...sdy,...cdzv->...xyzv", cs, cs, R)
    out = 0.25 * (R + rot)
    out = out + np.einsum("xz,yv->xyzv", g, g) - np.einsum("yz,xv->xyzv", g, g)
    out = out + np.einsum("...sxz,...syv->...xyzv", omega, omega) - np.einsum("...syz,...sxv->...xyzv", omega, omega)
    return out


def wqc(geo: Geometry, index: int, X: int, Y: int, Z: int, V: int) -> float:
    S = float(geo.S2[index])
    if abs(S - 2.0) > 1e-6:
        raise UsageError(f"the specialised W^qc needs S = 2, have {S:.9g}")
    W = wqc_tensor(value_of(geo.R)[index], value_of(geo.cs)[index], value_of(geo.omega)[index])
    return float(W[X, Y, Z, V])
