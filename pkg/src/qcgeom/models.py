"""The two model qc manifolds and the constructive recovery of their frames.

Points are stored as flat arrays of ambient coordinates:

* quaternionic Heisenberg group ``G(H) = H^n x Im H``: ``(q_1, ..., q_n, omega)``
  with each quaternion as 4 reals and ``omega`` as 3 reals (``4n + 3`` total);
* sphere ``S^{4n+3}`` in ``H^n x H``: ``(q'_1, ..., q'_n, p')`` (``4n + 4`` total).

Every formula is written once over a generic scalar, so the same code runs on
floats, numpy batches and jets.  The sphere structure is defined on all of
``R^{4n+4} minus 0`` with fields tangent to the concentric spheres; derivatives
are only ever taken along those tangent fields, so values on the unit sphere
are intrinsic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import jet as J
from .errors import DegenerateStructureError, DomainError, UsageError
from .jet import Jet, einsum, seed, sqrt, stack, value_of
from .quat import BASIS, ImQuaternion, Quaternion, qmul

SUPPORTED_N = (1, 2, 3)
GS_PIVOT_MIN = 1e-8
COND_LIMIT = 1e12
SPHERE_TOL = 1e-12


def check_n(n: int) -> int:
    if not isinstance(n, (int, np.integer)) or int(n) not in SUPPORTED_N:
        raise UsageError(f"n must be one of {SUPPORTED_N}, got {n!r}")
    return int(n)


# -- points --------------------------------------------------------------------


@dataclass(frozen=True)
class HeisPoint:
    """Point ``(q, omega)`` of the quaternionic Heisenberg group."""

    q: np.ndarray  # (n, 4)
    omega: np.ndarray  # (3,)

    @property
    def n(self) -> int:
        return self.q.shape[0]

    @classmethod
    def from_array(cls, x) -> "HeisPoint":
        x = np.asarray(x, dtype=float)
        if (x.size - 3) % 4 or x.size < 7:
            raise UsageError(f"bad Heisenberg coordinate length {x.size}")
        return cls(x[:-3].reshape(-1, 4).copy(), x[-3:].copy())

    def to_array(self) -> np.ndarray:
        return np.concatenate([self.q.ravel(), self.omega])

    @property
    def quaternions(self) -> tuple[Quaternion, ...]:
        return tuple(Quaternion(*row) for row in self.q)

    @property
    def im(self) -> ImQuaternion:
        return ImQuaternion(*self.omega)


@dataclass(frozen=True)
class SpherePoint:
    """Point ``(q', p')`` of the unit sphere in ``H^n x H``."""

    qp: np.ndarray  # (n + 1, 4), last row is p'

    def __post_init__(self):
        r = float(np.sum(self.qp**2))
        if abs(r - 1.0) > SPHERE_TOL:
            raise DomainError(f"point is off the unit sphere: |x|^2 = {r!r}")

    @property
    def n(self) -> int:
        return self.qp.shape[0] - 1

    @classmethod
    def from_array(cls, x) -> "SpherePoint":
        x = np.asarray(x, dtype=float)
        if x.size % 4 or x.size < 8:
            raise UsageError(f"bad sphere coordinate length {x.size}")
        return cls(x.reshape(-1, 4).copy())

    def to_array(self) -> np.ndarray:
        return self.qp.ravel().copy()

    @property
    def q(self) -> np.ndarray:
        return self.qp[:-1]

    @property
    def p(self) -> np.ndarray:
        return self.qp[-1]


# -- generic coordinate helpers ------------------------------------------------


def quats(x, start: int, count: int) -> tuple[Quaternion, ...]:
    """``count`` quaternions read from the last axis of ``x`` starting at ``start``."""
    return tuple(
        Quaternion(x[..., start + 4 * l], x[..., start + 4 * l + 1], x[..., start + 4 * l + 2], x[..., start + 4 * l + 3])
        for l in range(count)
    )


def flat(parts) -> object:
    """Stack quaternion / imaginary-quaternion parts into one coordinate axis."""
    comps = []
    for p in parts:
        comps.extend(p.components)
    return stack(comps, axis=-1)


def heis_split(x, n: int):
    return quats(x, 0, n), ImQuaternion(x[..., 4 * n], x[..., 4 * n + 1], x[..., 4 * n + 2])


def im_herm(a, b) -> ImQuaternion:
    """``Im sum_l a_l conj(b_l)``."""
    out = qmul(a[0], b[0].conj())
    for u, v in zip(a[1:], b[1:]):
        out = out + qmul(u, v.conj())
    return out.im


def heis_mul_coords(x, y, n: int):
    """Group law on flat coordinates: ``(q0, w0) o (q, w) = (q0 + q, w + w0 + 2 Im q0 conj(q))``."""
    q0, w0 = heis_split(x, n)
    q, w = heis_split(y, n)
    cross = im_herm(q0, q).scale(2.0)
    return flat([a + b for a, b in zip(q0, q)] + [w + w0 + cross])


def heis_inverse_coords(x):
    return -x


def dilate_coords(x, t: float, n: int):
    q, w = heis_split(x, n)
    return flat([a.scale(t) for a in q] + [w.scale(t * t)])


def gauge_norm_coords(x, n: int):
    q, w = heis_split(x, n)
    q2 = q[0].norm2()
    for a in q[1:]:
        q2 = q2 + a.norm2()
    return sqrt(sqrt(q2 * q2 + w.norm2()))


# -- public point operations ---------------------------------------------------


def group_mul(a: HeisPoint, b: HeisPoint) -> HeisPoint:
    if a.n != b.n:
        raise UsageError("group_mul needs points with matching n")
    return HeisPoint.from_array(heis_mul_coords(a.to_array(), b.to_array(), a.n))


def group_inverse(a: HeisPoint) -> HeisPoint:
    return HeisPoint.from_array(-a.to_array())


def dilation(a: HeisPoint, t: float) -> HeisPoint:
    return HeisPoint.from_array(dilate_coords(a.to_array(), t, a.n))


def gauge_norm(a: HeisPoint) -> float:
    """``N(q, w) = (|q|^4 + |w|^2)^(1/4)``."""
    return float(gauge_norm_coords(a.to_array(), a.n))


def theta_coords(x, n: int):
    """Heisenberg contact form ``1/2 (dw - q dq* + dq q*)`` as ``(..., 3, 4n+3)``."""
    q, _ = heis_split(x, n)
    cols = []
    for l in range(n):
        for c in range(4):
            # 1/2 (e_c conj(q) - q conj(e_c)) = Im(e_c conj(q))
            cols.append(stack(qmul(BASIS[c], q[l].conj()).im.components, axis=-1))
    zero = 0.0 * x[..., 0]
    for t in range(3):
        comps = [zero, zero, zero]
        comps[t] = zero + 0.5
        cols.append(stack(comps, axis=-1))
    return stack(cols, axis=-1)


def sphere_eta_coords(x, n: int, scale: float = 1.0):
    """Sphere form ``scale * (du conj(u) - u d conj(u))`` summed over all quaternion slots."""
    u = quats(x, 0, n + 1)
    cols = []
    for l in range(n + 1):
        for c in range(4):
            cols.append(stack(qmul(BASIS[c], u[l].conj()).im.scale(2.0 * scale).components, axis=-1))
    return stack(cols, axis=-1)


def theta_forms(p: HeisPoint) -> np.ndarray:
    """The three components of the Heisenberg contact form at ``p`` (shape ``(3, 4n+3)``)."""
    return np.asarray(theta_coords(p.to_array(), p.n))


NORMALIZATIONS = {"paper": 1.0, "sasakian": 0.5}


def eta_forms(p: SpherePoint, normalization: str = "sasakian") -> np.ndarray:
    """Sphere contact forms at ``p`` as covectors on ``R^{4n+4}`` (shape ``(3, 4n+4)``)."""
    if normalization not in NORMALIZATIONS:
        raise UsageError(f"unknown normalization {normalization!r}")
    x = p.to_array()
    r = float(x @ x)
    if abs(r - 1.0) > SPHERE_TOL:
        raise DomainError(f"point is off the unit sphere: |x|^2 = {r!r}")
    return np.asarray(sphere_eta_coords(x, p.n, NORMALIZATIONS[normalization]))


# -- models ---------------------------------------------------------------------


class QCModel:
    """Common interface of the two model spaces."""

    name: str = ""
    n: int
    dim: int  # ambient coordinate count

    @property
    def hdim(self) -> int:
        return 4 * self.n

    @property
    def mdim(self) -> int:
        return 4 * self.n + 3

    def forms(self, x):
        raise NotImplementedError

    def metric(self) -> np.ndarray:
        raise NotImplementedError

    def has_normal(self) -> bool:
        return False

    def base_point(self) -> np.ndarray:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, count: int, avoid_origin: bool = False) -> np.ndarray:
        raise NotImplementedError

    def descriptor(self) -> dict:
        return {"model": self.name, "n": self.n}

    @cached_property
    def calibration(self) -> float:
        """Homothety factor making ``g(I_s X, Y) = 1/2 d eta_s(X, Y)`` hold with ``I_s^2 = -1``."""
        x = seed(self.base_point()[None, :], 2)
        fr = frame_fields(self, x, kappa=1.0)
        w = value_of(fr.omega)[0]
        sq = np.einsum("sab,sbc->sac", w, w)
        k2 = -np.trace(sq, axis1=1, axis2=2).mean() / self.hdim
        return float(np.sqrt(k2))

    def validate(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise UsageError(f"{self.name} points need {self.dim} coordinates, got {x.shape[-1]}")
        return x

    def point_json(self, x) -> str:
        return json.dumps({**self.descriptor(), "point": [float(v) for v in np.asarray(x).ravel()]})

    @staticmethod
    def point_from_json(text: str):
        d = json.loads(text)
        model = make_model(d["model"], d["n"])
        return model, model.validate(d["point"])


@dataclass(frozen=True, eq=False)
class HeisenbergModel(QCModel):
    n: int = 2
    name: str = field(default="heisenberg", init=False)

    def __post_init__(self):
        check_n(self.n)

    @property
    def dim(self) -> int:
        return 4 * self.n + 3

    def forms(self, x):
        return theta_coords(x, self.n)

    def metric(self) -> np.ndarray:
        # left-invariant flat metric on H only sees the q-components
        G = np.zeros((self.dim, self.dim))
        G[: 4 * self.n, : 4 * self.n] = np.eye(4 * self.n)
        return G

    def base_point(self) -> np.ndarray:
        return np.zeros(self.dim)

    def sample(self, rng, count, avoid_origin=False):
        out = np.empty((0, self.dim))
        while out.shape[0] < count:
            x = rng.uniform(-1.0, 1.0, size=(count, self.dim))
            if avoid_origin:
                x = x[np.asarray(gauge_norm_coords(x, self.n)) >= 0.1]
            out = np.concatenate([out, x])
        return out[:count]


@dataclass(frozen=True, eq=False)
class SphereModel(QCModel):
    n: int = 2
    normalization: str = "sasakian"
    name: str = field(default="sphere", init=False)

    def __post_init__(self):
        check_n(self.n)
        if self.normalization not in NORMALIZATIONS:
            raise UsageError(f"unknown normalization {self.normalization!r}")

    @property
    def dim(self) -> int:
        return 4 * self.n + 4

    def forms(self, x):
        return sphere_eta_coords(x, self.n, NORMALIZATIONS[self.normalization])

    def metric(self) -> np.ndarray:
        return np.eye(self.dim)

    def has_normal(self) -> bool:
        return True

    def base_point(self) -> np.ndarray:
        x = np.zeros(self.dim)
        x[-4] = 1.0
        return x

    def sample(self, rng, count, avoid_origin=False):
        x = rng.standard_normal((count, self.dim))
        return x / np.linalg.norm(x, axis=1, keepdims=True)

    def descriptor(self) -> dict:
        return {"model": self.name, "n": self.n, "normalization": self.normalization}

    def isometry_to(self, x) -> np.ndarray:
        """Orthogonal ``L`` with ``L @ base_point() = x`` preserving every ``eta_s``.

        ``L`` is right multiplication ``u -> u B`` of the quaternion row
        ``u`` by a matrix with ``B B^* = 1`` whose last row is ``x``.
        """
        x = np.asarray(x, dtype=float)
        if abs(x @ x - 1.0) > SPHERE_TOL * 1e3:
            raise DomainError("point is not on the unit sphere")
        k = self.n + 1
        rows = [x.reshape(k, 4)]
        for l in np.argsort(np.abs(rows[0]).sum(axis=1)):
            r = np.zeros((k, 4))
            r[l, 0] = 1.0
            for b in rows:
                ip = _quat_rows(r, b)
                r = r - _qprod(np.broadcast_to(ip, b.shape), b)
            nr = np.linalg.norm(r)
            if nr > 1e-3:
                rows.append(r / nr)
            if len(rows) == k:
                break
        B = np.stack(rows[1:] + rows[:1])  # (row, col, 4)
        L = np.empty((self.dim, self.dim))
        for l in range(k):
            for c in range(4):
                e = np.zeros(4)
                e[c] = 1.0
                L[:, 4 * l + c] = _qprod(np.broadcast_to(e, B[l].shape), B[l]).reshape(-1)
        return L


def _qprod(a, b):
    return qmul(Quaternion.from_array(a), Quaternion.from_array(b)).to_array()


def _quat_rows(u, v):
    """``sum_k u_k conj(v_k)`` for quaternion rows ``(k, 4)``."""
    return _qprod(u, v * np.array([1.0, -1.0, -1.0, -1.0])).sum(axis=0)


def make_model(name: str, n: int, normalization: str = "sasakian") -> QCModel:
    if name == "heisenberg":
        return HeisenbergModel(n)
    if name == "sphere":
        return SphereModel(n, normalization)
    raise UsageError(f"unknown model {name!r}")


# -- frames -----------------------------------------------------------------------


@dataclass
class FrameFields:
    """Frame data as (possibly jet-valued) fields over a batch of points.

    Shapes carry a leading batch axis ``P``; ``m`` is the ambient dimension.
    """

    x: object  # (P, m)
    eta: object  # (P, 3, m)
    deta: object  # (P, 3, m, m)
    horiz: object  # (P, 4n, m)
    xi: object  # (P, 3, m)
    omega: object  # (P, 3, 4n, 4n): omega_s(e_a, e_b)
    kappa: float
    pivots: np.ndarray  # (P, 4n)
    metric: np.ndarray  # ambient G (m, m); g = kappa * G on H

    @property
    def full(self):
        """Full frame ``(e_1..e_4n, xi_1..xi_3)`` as ``(P, 4n+3, m)``."""
        return _concat(self.horiz, self.xi, axis=-2)

    @property
    def cs(self):
        """``I_s`` matrices in the horizontal frame: ``I_s e_b = sum_c cs[s, c, b] e_c``."""
        return self.omega.swapaxes(-1, -2) if isinstance(self.omega, Jet) else np.swapaxes(self.omega, -1, -2)

    def coframe(self, v):
        """Frame components ``theta^A(v)`` of ambient vectors ``v`` (last axis ``m``)."""
        ev = _contract_last(self.eta, v)  # (..., 3) along v's leading axes
        return _coframe(self, v, ev)


def _concat(a, b, axis):
    if isinstance(a, Jet) or isinstance(b, Jet):
        if not isinstance(a, Jet):
            a = Jet.constant(a, b.dim, b.order)
        if not isinstance(b, Jet):
            b = Jet.constant(b, a.dim, a.order)
        a, b, k = a._pair(b)
        ax = axis % a.ndim
        return Jet(np.concatenate([a.c, b.c], axis=ax), a.dim, k)
    return np.concatenate([a, b], axis=axis)


def _contract_last(forms, v):
    """``forms`` (P, r, m), ``v`` (P, ..., m) -> (P, ..., r)."""
    nv = (v.ndim if isinstance(v, Jet) else np.ndim(v)) - 2
    letters = "bcdefg"[:nv]
    return einsum(f"prm,p{letters}m->p{letters}r", forms, v)


def _coframe(fr: FrameFields, v, ev):
    nv = (v.ndim if isinstance(v, Jet) else np.ndim(v)) - 2
    letters = "bcdefg"[:nv]
    # vertical part removed: v_H = v - sum_s eta_s(v) xi_s
    vh = v - einsum(f"p{letters}s,psm->p{letters}m", ev, fr.xi)
    Ge = einsum("pam,mk->pak", fr.horiz, fr.kappa * fr.metric)
    th = einsum(f"pak,p{letters}k->p{letters}a", Ge, vh)
    return _concat(th, ev, axis=-1)


def _gs_orthonormal(rows):
    """Euclidean Gram-Schmidt of a few independent rows ``(P, c, m)``."""
    out = []
    for j in range(rows.shape[1]):
        v = rows[:, j]
        for u in out:
            v = v - u * einsum("pm,pm->p", u, v)[..., None]
        nrm = sqrt(einsum("pm,pm->p", v, v))
        out.append(v / nrm[..., None])
    return out


def _take_rows(a, idx):
    """Per-point row selection: ``a[p, idx[p]]`` for a batch ``(P, k, m)``."""
    P = idx.shape[0]
    if isinstance(a, Jet):
        return Jet(a.c[np.arange(P), idx], a.dim, a.order)
    return a[np.arange(P), idx]


def frame_fields(model: QCModel, x, kappa: float | None = None, pivots: np.ndarray | None = None) -> FrameFields:
    """Contact forms, Reeb fields and an orthonormal horizontal frame over a batch.

    ``x`` is a batch of points ``(P, m)``: plain arrays or jets.  The
    returned fields have one jet order less than ``x`` because the
    construction consumes one derivative (``d eta``).
    """
    from .tensor import exterior_d_jet

    if not isinstance(x, Jet) or x.order < 1:
        raise UsageError("frame_fields needs jet-valued points of order >= 1")
    if kappa is None:
        kappa = model.calibration
    eta_full = model.forms(x)
    deta = exterior_d_jet(eta_full)
    k = deta.order
    eta = eta_full.truncate(k)
    xk = x.truncate(k)
    P, m, hd = x.shape[0], model.dim, model.hdim

    # H = ker eta (and tangent to the level sphere)
    rows = [eta[:, s] for s in range(3)]
    if model.has_normal():
        rows.append(xk)
    normals = _gs_orthonormal(stack(rows, axis=1))
    eye = np.broadcast_to(np.eye(m), (P, m, m))
    cand = Jet.constant(eye, x.dim, k)
    for u in normals:
        cand = cand - einsum("pi,pm->pim", einsum("pim,pm->pi", cand, u), u)

    # Gram-Schmidt in the calibrated horizontal metric with greedy pivots
    G = kappa * model.metric()
    chosen = np.zeros((P, m), dtype=bool)
    piv = np.empty((P, hd), dtype=np.int64)
    es = []
    for j in range(hd):
        Gc = einsum("pim,mk->pik", cand, G)
        nrm2 = einsum("pik,pik->pi", Gc, cand)
        if pivots is None:
            vals = np.where(chosen, -np.inf, value_of(nrm2))
            idx = np.argmax(vals, axis=1)
        else:
            idx = np.asarray(pivots)[:, j]
        best = value_of(nrm2)[np.arange(P), idx]
        if np.any(best < GS_PIVOT_MIN**2):
            raise DegenerateStructureError(f"Gram-Schmidt pivot {np.sqrt(best.min()):.3g} below {GS_PIVOT_MIN}")
        chosen[np.arange(P), idx] = True
        piv[:, j] = idx
        e = _take_rows(cand, idx) / sqrt(_take_rows(nrm2[..., None], idx)[..., 0])[..., None]
        es.append(e)
        proj = einsum("pik,pk->pi", Gc, e)
        cand = cand - einsum("pi,pm->pim", proj, e)
    horiz = stack(es, axis=1)

    xi = reeb_fields(model, xk, eta, deta, horiz)
    dh = einsum("psij,paj->psia", deta, horiz)
    omega = 0.5 * einsum("pai,psib->psab", horiz, dh)
    return FrameFields(xk, eta, deta, horiz, xi, omega, kappa, piv, model.metric())


def reeb_fields(model: QCModel, x, eta, deta, horiz):
    """Solve the Reeb conditions for ``xi_1..xi_3`` given the horizontal frame.

    ``eta_s(xi_k) = delta_sk`` fixes the component along a vertical
    complement, and ``d eta_s(xi_s, e_a) = 0`` fixes the horizontal part
    through a nondegenerate ``4n x 4n`` system.  The remaining (cross)
    conditions are verified separately.
    """
    Z = eta
    if model.has_normal():
        r2 = einsum("pm,pm->p", x, x)
        Z = Z - einsum("ps,pm->psm", einsum("psm,pm->ps", Z, x) / r2[..., None], x)
    M = einsum("psm,ptm->pst", eta, Z)  # eta_s(Z_t)
    Minv = J.solve(M, np.broadcast_to(np.eye(3), value_of(M).shape), COND_LIMIT)
    xi0 = einsum("ptk,ptm->pkm", Minv, Z)
    out = []
    for s in range(3):
        W = _bilinear(deta[:, s], horiz, horiz)
        rhs = -_bilinear(deta[:, s], xi0[:, s][:, None], horiz)[:, 0]  # (P, 4n)
        d = J.solve(W.swapaxes(-1, -2), rhs[..., None], COND_LIMIT)[..., 0]
        out.append(xi0[:, s] + einsum("pa,pam->pm", d, horiz))
    return stack(out, axis=1)


def _bilinear(form, u, v):
    """``form(u_a, v_b)`` for ``form`` (P, m, m), ``u`` (P, A, m), ``v`` (P, B, m)."""
    fv = einsum("pij,pbj->pbi", form, v)
    return einsum("pai,pbi->pab", u, fv)


# -- public frame API ------------------------------------------------------------------


@dataclass(frozen=True)
class FrameData:
    """Structure data at a single point (plain arrays)."""

    point: np.ndarray
    eta: np.ndarray  # (3, m)
    xi: np.ndarray  # (3, m)
    horiz: np.ndarray  # (4n, m)
    cs: np.ndarray  # (3, 4n, 4n)
    omega2: np.ndarray  # (3, 4n, 4n)
    g: np.ndarray  # (4n, 4n) Gram matrix of the frame in the horizontal metric
    h: np.ndarray  # (m, m) ambient matrix of h = g + sum eta_s^2
    deta: np.ndarray  # (3, m, m)
    kappa: float
    pivots: np.ndarray


def _frame_batch(model: QCModel, points, order: int = 1) -> FrameFields:
    pts = np.atleast_2d(model.validate(points))
    return frame_fields(model, seed(pts, order))


def horizontal_frame(model: QCModel, p) -> FrameData:
    x = np.asarray(p.to_array() if hasattr(p, "to_array") else p, dtype=float)
    fr = _frame_batch(model, x[None, :])
    eta, xi, e = (value_of(a)[0] for a in (fr.eta, fr.xi, fr.horiz))
    om = value_of(fr.omega)[0]
    G = fr.kappa * fr.metric
    # coframe matrix: theta^a(v) = g(e_a, v_H), theta^s = eta_s
    proj = np.eye(model.dim) - xi.T @ eta
    th = np.concatenate([e @ G @ proj, eta])
    return FrameData(
        point=x,
        eta=eta,
        xi=xi,
        horiz=e,
        cs=np.swapaxes(om, 1, 2),
        omega2=om,
        g=e @ G @ e.T,
        h=th.T @ th,
        deta=value_of(fr.deta)[0],
        kappa=fr.kappa,
        pivots=fr.pivots[0],
    )


def reeb_solve(model: QCModel, p) -> np.ndarray:
    """Reeb fields ``(xi_1, xi_2, xi_3)`` at ``p`` as ambient vectors ``(3, m)``."""
    return horizontal_frame(model, p).xi
