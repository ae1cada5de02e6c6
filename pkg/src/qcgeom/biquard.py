"""Levi-Civita and Biquard connections, torsion and curvature on the models.

Everything is computed in the full orthonormal frame
``E = (e_1, ..., e_4n, xi_1, xi_2, xi_3)`` produced by :mod:`qcgeom.models`.
Frame indices ``0 .. 4n-1`` are horizontal, ``4n .. 4n+2`` vertical.
All tensors are covariant and carry a leading batch axis over points.

The Biquard connection is assembled from the Levi-Civita connection of
``h = g + sum eta_s^2`` and the torsion through

    h(nabla_A B, C) = h(nabla^h_A B, C) + 1/2 [T(A,B,C) - T(B,C,A) + T(C,A,B)].

On the models the torsion is fully determined by the structure:
``T(X, Y) = -[X, Y]_V`` on H, ``T(xi, X)`` is the horizontal endomorphism
measured from the Lie derivative of ``g`` (projected off sp(n)+sp(1)), and
``T(xi_i, xi_j) = -S xi_k - [xi_i, xi_j]_H``.  The normalized scalar
curvature ``S`` is found first from a pass that never touches the
vertical-vertical torsion, then fed back.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ModelAssumptionError, UsageError
from .jet import Jet, einsum, seed, stack, value_of
from .models import QCModel, frame_fields
from .tensor import batched_bracket, frame_casimir_bilinear

S_AGREEMENT = 1e-7
BRACKET_H_LIMIT = 1e-8

CYCLIC = ((0, 1, 2), (1, 2, 0), (2, 0, 1))


def rearr(t, spec: str):
    """Permute axes by name, e.g. ``rearr(c, "pbca->pabc")``."""
    src, dst = spec.split("->")
    axes = tuple(src.index(ch) for ch in dst)
    if isinstance(t, Jet):
        return t.transpose(*axes)
    return np.transpose(t, axes)


def _tr(t, k: int):
    return t.truncate(k) if isinstance(t, Jet) else t


def _order(t) -> int:
    return t.order if isinstance(t, Jet) else 10**6


class Geometry:
    """Connection and curvature workspace for a batch of points of a model.

    ``order`` is the jet order of the coordinate seeds.  Frame fields carry
    ``order - 1``, connection coefficients ``order - 2`` and curvature
    ``order - 3`` Taylor orders, which bounds the derivatives available to
    downstream operators.
    """

    def __init__(self, model: QCModel, points, order: int = 3, pivots=None):
        if order < 2:
            raise UsageError("Geometry needs seed order >= 2")
        self.model = model
        self.n = model.n
        self.hd = model.hdim
        self.D = model.mdim
        self.points = np.atleast_2d(model.validate(points))
        self.order = order
        self.x = seed(self.points, order)
        self.frame = frame_fields(model, self.x, pivots=pivots)
        self.E = self.frame.full
        self.P = self.points.shape[0]

    # -- frame data ---------------------------------------------------------------
    @property
    def H(self) -> slice:
        return slice(0, self.hd)

    @property
    def V(self) -> slice:
        return slice(self.hd, self.D)

    @cached_property
    def cs(self):
        return self.frame.cs

    @cached_property
    def omega(self):
        return self.frame.omega

    def deriv(self, t, k: int | None = None):
        """Frame derivatives ``E_A(t)`` -> shape ``(P, D, *t.shape[1:])``."""
        g = t.grad()
        rest = "bcdefgh"[: t.ndim - 1]
        E = self.E if k is None else _tr(self.E, k)
        return einsum(f"pam,p{rest}m->pa{rest}", E, g)

    # -- brackets and Levi-Civita ---------------------------------------------------
    @cached_property
    def brackets_ambient(self):
        return batched_bracket(self.E, self.E)  # (P, D, D, m)

    @cached_property
    def c(self):
        """Structure functions ``c[A, B, C] = h([E_A, E_B], E_C)``."""
        return self.frame.coframe(self.brackets_ambient)

    @cached_property
    def radial_leak(self) -> np.ndarray:
        """Normal component of the frame brackets (sphere only; zero otherwise)."""
        if not self.model.has_normal():
            return np.zeros(self.P)
        br = value_of(self.brackets_ambient)
        x = self.points
        return np.abs(np.einsum("pabm,pm->pab", br, x)).max(axis=(1, 2))

    @cached_property
    def gamma_h(self):
        """Levi-Civita coefficients ``h(nabla^h_{E_A} E_B, E_C)`` (Koszul, orthonormal frame)."""
        c = self.c
        return 0.5 * (c - rearr(c, "pbca->pabc") + rearr(c, "pcab->pabc"))

    # -- torsion ----------------------------------------------------------------------
    @cached_property
    def torsion_xi(self):
        """``T(xi_s, e_a, e_b)`` measured from the structure, shape ``(P, 3, 4n, 4n)``."""
        H, V = self.H, self.V
        cx = self.c[:, V, H, H]  # c[xi_s, a, b]
        sym = -0.5 * (cx + rearr(cx, "psba->psab"))
        skew = 0.5 * (cx - rearr(cx, "psba->psab"))
        return sym - self._perp(skew)

    def _perp(self, K):
        """Projection of skew forms ``(P, 3, 4n, 4n)`` onto ``(sp(n) + sp(1))^perp``."""
        cs = _tr(self.cs, _order(K))
        om = _tr(self.omega, _order(K))
        out = []
        for s in range(3):
            k = K[:, s]
            k3 = 0.25 * (k + frame_casimir_bilinear(k, cs))
            km = k - k3
            # remove the sp(1) directions spanned by omega_t (|omega_t|^2 = 4n)
            coef = einsum("ptab,pab->pt", om, km) * (1.0 / self.hd)
            km = km - einsum("pt,ptab->pab", coef, om)
            out.append(km)
        return stack(out, axis=1)

    def torsion(self, S) -> Jet:
        """Full torsion ``T[A, B, C] = h(T(E_A, E_B), E_C)`` with vertical constant ``S``."""
        c = self.c
        k = c.order
        H, V, hd, D = self.H, self.V, self.hd, self.D
        T = np.zeros((self.P, D, D, D, c.c.shape[-1]))
        # horizontal pairs: T(X, Y) = -[X, Y]_V
        T[:, H, H, V] = -c.c[:, H, H, V]
        tx = self.torsion_xi.c
        T[:, V, H, H] = tx
        T[:, H, V, H] = -np.swapaxes(tx, 1, 2)
        # vertical pairs: T(xi_i, xi_j) = -S xi_k - [xi_i, xi_j]_H
        S = np.broadcast_to(np.asarray(S, dtype=float), (self.P,))
        for i, j, kk in CYCLIC:
            a, b, cc = hd + i, hd + j, hd + kk
            T[:, a, b, H] = -c.c[:, a, b, H]
            T[:, b, a, H] = c.c[:, a, b, H]
            T[:, a, b, cc, 0] = -S
            T[:, b, a, cc, 0] = S
        return Jet(T, c.dim, k)

    # -- Biquard connection -------------------------------------------------------------
    def gamma_for(self, S):
        T = self.torsion(S)
        return self.gamma_h + 0.5 * (T - rearr(T, "pbca->pabc") + rearr(T, "pcab->pabc")), T

    @cached_property
    def pass1(self):
        G, T = self.gamma_for(0.0)
        if self.order < 3:
            # too few orders for curvature here; S only needs values, so borrow a deeper workspace
            deeper = Geometry(self.model, self.points, 3, pivots=self.frame.pivots)
            return G, T, deeper.S1
        R = self.curvature_tensor(G.truncate(1))
        return G, T, self.scalar_from(R)

    @cached_property
    def S1(self) -> np.ndarray:
        return value_of(self.pass1[2])

    @cached_property
    def _pass2(self):
        G, T = self.gamma_for(self.S1)
        return G, T

    @property
    def gamma(self):
        return self._pass2[0]

    @property
    def T(self):
        return self._pass2[1]

    @cached_property
    def R(self):
        return self.curvature_tensor(self.gamma)

    @cached_property
    def S(self):
        return self.scalar_from(self.R)

    @cached_property
    def S2(self) -> np.ndarray:
        return value_of(self.S)

    def check_assumptions(self):
        gap = np.abs(self.S1 - self.S2).max()
        if gap > S_AGREEMENT:
            raise ModelAssumptionError(f"two-pass S disagreement {gap:.3g}")
        lb = self.vertical_bracket_h.max()
        if lb > BRACKET_H_LIMIT:
            raise ModelAssumptionError(f"[xi_i, xi_j]_H = {lb:.3g} exceeds {BRACKET_H_LIMIT}")

    @cached_property
    def vertical_bracket_h(self) -> np.ndarray:
        c = value_of(self.c)
        return np.abs(c[:, self.V, self.V, self.H]).max(axis=(1, 2, 3))

    @cached_property
    def alpha(self):
        """sp(1) connection forms ``alpha_k(E_A) = h(nabla_A xi_i, xi_j)`` for cyclic ``(i, j, k)``, shape ``(P, 3, D)``."""
        G = self.gamma
        hd = self.hd
        comps = [None] * 3
        for i, j, k in CYCLIC:
            comps[k] = G[:, :, hd + i, hd + j]
        return stack(comps, axis=1)

    # -- curvature ----------------------------------------------------------------------
    def curvature_tensor(self, G):
        """``R[A,B,C,D] = h(nabla_A nabla_B C - nabla_B nabla_A C - nabla_[A,B] C, D)``."""
        k = G.order - 1
        dG = self.deriv(G, k)  # dG[A, B, C, D] = E_A(G[B, C, D])
        Gk = _tr(G, k)
        ck = _tr(self.c, k)
        R = dG - rearr(dG, "pbacd->pabcd")
        GG = einsum("pbce,paed->pabcd", Gk, Gk)
        R = R + GG - rearr(GG, "pbacd->pabcd")
        R = R - einsum("pabf,pfcd->pabcd", ck, Gk)
        return R

    def scalar_from(self, R):
        H = self.H
        Rh = R[:, H, H, H, H]
        return _trace_baab(Rh) * (1.0 / (8 * self.n * (self.n + 2)))

    @cached_property
    def R_h(self):
        return self.curvature_tensor(self.gamma_h)

    @cached_property
    def scal_h(self) -> np.ndarray:
        R = value_of(self.R_h)
        return np.einsum("pabba->p", R)

    # -- contractions -----------------------------------------------------------------------
    @cached_property
    def ricci(self):
        R = value_of(self.R)
        return np.einsum("pbABb->pAB", R[:, : self.hd, :, :, : self.hd])

    @cached_property
    def rho(self):
        """``rho_s(A, B) = 1/(4n) R(A, B, e_a, I_s e_a)``, shape ``(P, 3, D, D)``."""
        R = value_of(self.R)[:, :, :, : self.hd, : self.hd]
        cs = value_of(self.cs)
        return np.einsum("pABac,psca->psAB", R, cs) / self.hd

    @cached_property
    def zeta(self):
        """``zeta_s(A, B) = 1/(4n) R(e_a, A, B, I_s e_a)``."""
        R = value_of(self.R)[:, : self.hd, :, :, : self.hd]
        cs = value_of(self.cs)
        return np.einsum("paABc,psca->psAB", R, cs) / self.hd

    @cached_property
    def torsion_parts(self):
        return torsion_components(value_of(self.torsion_xi), value_of(self.cs))


def _trace_baab(Rh):
    # sum_{a,b} R[b, a, a, b]
    hd = Rh.shape[1]
    tot = None
    for a in range(hd):
        for b in range(hd):
            term = Rh[:, b, a, a, b]
            tot = term if tot is None else tot + term
    return tot


# -- torsion decomposition ------------------------------------------------------------------


def torsion_components(t_xi, cs):
    """``(T0, U)`` bilinear forms from the torsion endomorphisms ``T_{xi_s}``.

    ``t_xi[..., s, a, b] = g(T(xi_s, e_a), e_b)``.  The symmetric part of
    each ``T_{xi_s}`` gives ``T0 = g((sum_s T0_{xi_s} I_s) X, Y)``; the
    skew part is ``I_s u`` with ``u`` symmetric, commuting with every
    ``I_s``, and ``U = g(u X, Y)``.  Accepts arrays or jets.
    """
    if not isinstance(t_xi, Jet):
        t_xi = np.asarray(t_xi, dtype=float)
    tT = _swap(t_xi)
    # endomorphism matrices N[c, a] = g(T e_a, e_c) = B[a, c]
    Nsym = 0.5 * (tT + t_xi)
    Nskw = 0.5 * (tT - t_xi)
    t0_endo = einsum("...sij,...sjk->...ik", Nsym, cs)
    us = einsum("...sij,...sjk->...sik", cs, Nskw)
    u = (us[..., 0, :, :] + us[..., 1, :, :] + us[..., 2, :, :]) * (-1.0 / 3.0)
    return _swap(t0_endo), _swap(u)


def _swap(t):
    return t.swapaxes(-1, -2) if isinstance(t, Jet) else np.swapaxes(t, -1, -2)


# -- per-point public API -------------------------------------------------------------------


@dataclass(frozen=True)
class ConnectionData:
    gamma: np.ndarray  # (D, D, D) h(nabla_{E_A} E_B, E_C)
    alpha: np.ndarray  # (3, D)
    torsion: np.ndarray  # (D, D, D) h(T(E_A, E_B), E_C)
    S_pass1: float
    S_pass2: float


@dataclass(frozen=True)
class CurvatureData:
    R: np.ndarray  # (D, D, D, D)
    Ric: np.ndarray  # (D, D)
    S: float
    rho: np.ndarray  # (3, D, D)
    zeta: np.ndarray  # (3, D, D)
    T0: np.ndarray  # (4n, 4n)
    U: np.ndarray  # (4n, 4n)


def _point(p) -> np.ndarray:
    return np.asarray(p.to_array() if hasattr(p, "to_array") else p, dtype=float)


def levi_civita(model: QCModel, p, A: int, B: int) -> np.ndarray:
    """Frame components of ``nabla^h_{E_A} E_B`` at ``p``."""
    geo = Geometry(model, _point(p)[None], order=2)
    return value_of(geo.gamma_h)[0, A, B]


def biquard_connection(model: QCModel, p) -> ConnectionData:
    geo = Geometry(model, _point(p)[None], order=3)
    geo.check_assumptions()
    return ConnectionData(
        gamma=value_of(geo.gamma)[0],
        alpha=value_of(geo.alpha)[0],
        torsion=value_of(geo.T)[0],
        S_pass1=float(geo.S1[0]),
        S_pass2=float(geo.S2[0]),
    )


def curvature_data(geo: Geometry, index: int = 0) -> CurvatureData:
    T0, U = geo.torsion_parts
    return CurvatureData(
        R=value_of(geo.R)[index],
        Ric=geo.ricci[index],
        S=float(geo.S2[index]),
        rho=geo.rho[index],
        zeta=geo.zeta[index],
        T0=T0[index],
        U=U[index],
    )


def curvature(model: QCModel, p, A: int, B: int, C: int, Dd: int) -> float:
    geo = Geometry(model, _point(p)[None], order=3)
    return float(value_of(geo.R)[0, A, B, C, Dd])


def contractions(model: QCModel, p) -> CurvatureData:
    geo = Geometry(model, _point(p)[None], order=3)
    geo.check_assumptions()
    return curvature_data(geo)


def lichnerowicz_tensor(cd: CurvatureData, X, n: int) -> float:
    """``L(X, X) = 2(n+2) S g(X,X) + a_n T0(X,X) + b_n U(X,X)`` for horizontal ``X``."""
    if n < 2:
        raise UsageError("the Lichnerowicz tensor needs n >= 2")
    X = np.asarray(X, dtype=float)
    a = 2 * (2 * n + 3) * (n + 2) / (2 * n + 1)
    b = 4 * (2 * n - 1) * (n + 2) ** 2 / ((2 * n + 1) * (n - 1))
    return float(2 * (n + 2) * cd.S * X @ X + a * X @ cd.T0 @ X + b * X @ cd.U @ X)


def three_sasakian_curvature(omega: np.ndarray) -> np.ndarray:
    """Closed-form horizontal curvature of the unit 3-Sasakian sphere from ``omega[..., s, a, b]``.

    ``R(X,Y,Z,V) = g(Y,Z)g(X,V) - g(Y,V)g(X,Z)
    + sum_s [w_s(Y,Z)w_s(X,V) - w_s(X,Z)w_s(Y,V) - 2 w_s(X,Y)w_s(Z,V)]``.
    """
    omega = np.asarray(omega, dtype=float)
    g = np.eye(omega.shape[-1])
    out = np.einsum("yz,xv->xyzv", g, g) - np.einsum("yv,xz->xyzv", g, g)
    out = out + np.einsum("...syz,...sxv->...xyzv", omega, omega)
    out = out - np.einsum("...sxz,...syv->...xyzv", omega, omega)
    return out - 2.0 * np.einsum("...sxy,...szv->...xyzv", omega, omega)
