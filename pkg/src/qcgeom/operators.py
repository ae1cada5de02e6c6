"""Differential operators on scalar fields and Monte-Carlo integration.

Test functions are ambient polynomials of degree at most three, evaluated
on coordinate jets so that every derivative is exact to roundoff.  All
operators are batched: a :class:`FieldCalculus` holds ``F`` functions at
``P`` points and produces arrays with leading axes ``(P, F)``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property, lru_cache
from itertools import combinations_with_replacement
from math import factorial
from typing import Callable, Sequence

import numpy as np

from .biquard import CYCLIC, Geometry, _tr, torsion_components
from .errors import UsageError
from .jet import Jet, einsum, value_of
from .models import QCModel, SphereModel
from .tensor import frame_casimir_bilinear

FAMILIES = ("linear", "quadratic", "cubic")


def _symmetrize(c: np.ndarray) -> np.ndarray:
    if c.ndim == 2:
        return 0.5 * (c + c.T)
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    return sum(np.transpose(c, p) for p in perms) / 6.0


@dataclass(frozen=True)
class ScalarField:
    """``f(x) = c0 + c1.x + x.c2.x + c3[x, x, x]`` in ambient coordinates."""

    family: str
    c0: float
    c1: np.ndarray
    c2: np.ndarray | None = None
    c3: np.ndarray | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise UsageError(f"unknown field family {self.family!r}")

    @property
    def dim(self) -> int:
        return int(np.shape(self.c1)[0])

    @classmethod
    def random(cls, family: str, dim: int, seed: int) -> "ScalarField":
        """Seeded coefficients uniform in ``[-1, 1]``; linear fields have no constant term."""
        if family not in FAMILIES:
            raise UsageError(f"unknown field family {family!r}")
        rng = np.random.default_rng(seed)
        u = lambda *shape: rng.uniform(-1.0, 1.0, shape)  # noqa: E731
        c1 = u(dim)
        if family == "linear":
            return cls(family, 0.0, c1, seed=seed)
        c0 = float(u())
        c2 = _symmetrize(u(dim, dim))
        c3 = _symmetrize(u(dim, dim, dim)) if family == "cubic" else None
        return cls(family, c0, c1, c2, c3, seed=seed)

    @classmethod
    def coordinate(cls, dim: int, index: int) -> "ScalarField":
        c1 = np.zeros(dim)
        c1[index] = 1.0
        return cls("linear", 0.0, c1)

    def __call__(self, x):
        return evaluate_fields([self], x)[..., 0]

    def transformed(self, L: np.ndarray) -> "ScalarField":
        """Coefficients of ``x -> f(L x)``."""
        c2 = None if self.c2 is None else L.T @ self.c2 @ L
        c3 = None if self.c3 is None else np.einsum("ijk,ia,jb,kc->abc", self.c3, L, L, L)
        return ScalarField(self.family, self.c0, L.T @ self.c1, c2, c3, self.seed)

    def to_json(self) -> dict:
        if self.seed is not None:
            return {"family": self.family, "seed": int(self.seed), "dim": self.dim}
        out = {"family": self.family, "c0": self.c0, "c1": self.c1.tolist()}
        if self.c2 is not None:
            out["c2"] = self.c2.tolist()
        if self.c3 is not None:
            out["c3"] = self.c3.tolist()
        return out

    @classmethod
    def from_json(cls, d: dict, dim: int | None = None) -> "ScalarField":
        if "seed" in d:
            return cls.random(d["family"], int(d.get("dim", dim)), int(d["seed"]))
        arr = lambda k: None if k not in d else np.asarray(d[k], dtype=float)  # noqa: E731
        return cls(d["family"], float(d.get("c0", 0.0)), arr("c1"), arr("c2"), arr("c3"))


def _is_seed(x) -> bool:
    if not isinstance(x, Jet) or x.order < 1 or x.ndim != 2 or x.shape[-1] != x.dim:
        return False
    m = x.dim
    lin = x.c[..., 1 : m + 1]
    return bool(np.array_equal(lin, np.broadcast_to(np.eye(m), lin.shape)) and not np.any(x.c[..., m + 1 :]))


@lru_cache(maxsize=None)
def _monomials(dim: int, degree: int):
    """Index tuples and multinomial counts of the degree-``degree`` monomials in jet order."""
    combos = list(combinations_with_replacement(range(dim), degree))
    idx = np.array(combos, dtype=np.int64).reshape(len(combos), degree)
    mult = np.array([factorial(degree) / np.prod([factorial(c.count(v)) for v in set(c)]) for c in combos])
    return idx, mult


def _polynomial_jets(fields: Sequence[ScalarField], x: Jet) -> Jet:
    """Taylor coefficients of the fields at seeded points, written down directly."""
    m, k = x.dim, x.order
    p = x.c[..., 0]
    F = len(fields)
    c0 = np.array([f.c0 for f in fields])
    c1 = np.stack([f.c1 for f in fields])
    c2 = np.stack([np.zeros((m, m)) if f.c2 is None else _symmetrize(f.c2) for f in fields])
    c3 = np.stack([np.zeros((m, m, m)) if f.c3 is None else _symmetrize(f.c3) for f in fields])
    c3p = np.einsum("fijk,pi->pfjk", c3, p)
    Q = c2[None] + 3 * c3p  # (P, F, m, m)
    g = c1[None] + np.einsum("pfjk,pk->pfj", 2 * c2[None] + 3 * c3p, p)
    val = c0 + np.einsum("pfj,pj->pf", c1[None] + np.einsum("pfjk,pk->pfj", c2[None] + c3p, p), p)
    size = x.space.size(k)
    out = np.zeros(p.shape[:1] + (F, size))
    out[..., 0] = val
    out[..., 1 : m + 1] = g
    start = m + 1
    for d, T in ((2, Q), (3, c3[None])):
        if d > k:
            break
        idx, mult = _monomials(m, d)
        block = T[(...,) + tuple(idx.T)] * mult
        out[..., start : start + len(mult)] = block
        start += len(mult)
    return Jet(out, m, k)


def evaluate_fields(fields: Sequence[ScalarField], x):
    """Evaluate ``F`` fields on points ``x`` of shape ``(P, m)`` -> ``(P, F)``."""
    m = fields[0].dim
    if _is_seed(x) and m == x.dim:
        return _polynomial_jets(fields, x)
    c0 = np.array([f.c0 for f in fields])
    c1 = np.stack([f.c1 for f in fields])
    out = einsum("pm,fm->pf", x, c1) + c0
    if any(f.c2 is not None for f in fields):
        c2 = np.stack([np.zeros((m, m)) if f.c2 is None else f.c2 for f in fields])
        y = einsum("pm,fmk->pfk", x, c2)
        out = out + einsum("pfk,pk->pf", y, x)
    if any(f.c3 is not None for f in fields):
        c3 = np.stack([np.zeros((m, m, m)) if f.c3 is None else f.c3 for f in fields])
        z = einsum("pi,fijk->pfjk", x, c3)
        y = einsum("pfjk,pk->pfj", z, x)
        out = out + einsum("pfj,pj->pf", y, x)
    return out


# -- batched calculus ---------------------------------------------------------------


class FieldCalculus:
    """Covariant derivatives of several fields over a :class:`Geometry` batch.

    With seed order ``K`` the available Taylor orders are: ``df`` ``K-1``,
    Hessians ``K-2``, third derivatives ``K-3``.  Values need ``K >= 2``
    for Hessians, ``K >= 3`` for third derivatives and the P-form, and
    ``K >= 4`` for the C-operator.
    """

    def __init__(self, geo: Geometry, fields: Sequence[ScalarField]):
        self.geo = geo
        self.fields = list(fields)
        if self.fields[0].dim != geo.model.dim:
            raise UsageError("field dimension does not match the model")
        self.K = geo.order
        self.n = geo.n
        self.hd = geo.hd

    def _need(self, k: int, what: str):
        if self.K < k:
            raise UsageError(f"{what} needs seed order >= {k}, have {self.K}")

    def _d(self, t: Jet, k: int) -> Jet:
        """``E_A(t)`` inserted after the field axis: ``(P, F, A, ...)``."""
        rest = "bcdeg"[: t.ndim - 2]
        E = _tr(self.geo.E, k)
        return einsum(f"pam,pf{rest}m->pfa{rest}", E, _tr(t, k + 1).grad())

    def _gamma(self, k: int):
        return _tr(self.geo.gamma, k)

    @cached_property
    def F(self) -> Jet:
        return evaluate_fields(self.fields, self.geo.x)

    @cached_property
    def df(self) -> Jet:
        """``df(E_A)``, shape ``(P, F, D)``."""
        return self._d(self.F, self.K - 1)

    @cached_property
    def hess(self) -> Jet:
        """``nabla^2 f(A, B) = E_A E_B f - (nabla_A B) f``."""
        k = self.K - 2
        df = _tr(self.df, k)
        return self._d(self.df, k) - einsum("pabc,pfc->pfab", self._gamma(k), df)

    @cached_property
    def nab3(self) -> Jet:
        """``nabla^3 f(A, B, C) = (nabla_A nabla^2 f)(B, C)``."""
        self._need(3, "the third covariant derivative")
        k = self.K - 3
        G = self._gamma(k)
        h = _tr(self.hess, k)
        out = self._d(self.hess, k)
        out = out - einsum("pabe,pfec->pfabc", G, h)
        return out - einsum("pace,pfbe->pfabc", G, h)

    @cached_property
    def hess_riemannian(self) -> Jet:
        """Levi-Civita Hessian of ``h`` computed directly."""
        k = self.K - 2
        G = _tr(self.geo.gamma_h, k)
        return self._d(self.df, k) - einsum("pabc,pfc->pfab", G, _tr(self.df, k))

    @cached_property
    def hess_from_torsion(self) -> Jet:
        """Levi-Civita Hessian assembled from the Biquard one plus torsion terms."""
        k = self.K - 2
        T = _tr(self.geo.T, k)
        df = _tr(self.df, k)
        t1 = einsum("pabc,pfc->pfab", T, df)
        t2 = einsum("pbca,pfc->pfab", T, df)
        t3 = einsum("pcab,pfc->pfab", T, df)
        return self.hess + 0.5 * (t1 - t2 + t3)

    # -- horizontal pieces ----------------------------------------------------------
    @property
    def grad(self) -> Jet:
        return self.df[..., : self.hd]

    @property
    def vgrad(self) -> Jet:
        return self.df[..., self.hd :]

    @cached_property
    def hh(self) -> Jet:
        return self.hess[..., : self.hd, : self.hd]

    @cached_property
    def sublaplacian(self) -> Jet:
        return -_trace(self.hh)

    @cached_property
    def riemannian_laplacian(self) -> Jet:
        return -_trace(self.hess_riemannian)

    def sublaplacian_of(self, G: Jet) -> Jet:
        """Sub-Laplacian of a jet-valued scalar ``(P, F)`` of order at least 2."""
        k = G.order - 2
        dG = self._d(G, k + 1)
        hG = self._d(dG, k) - einsum("pabc,pfc->pfab", self._gamma(k), _tr(dG, k))
        return -_trace(hG[..., : self.hd, : self.hd])

    def _cs(self, k: int):
        return _tr(self.geo.cs, k).expand(1)  # (P, 1, 3, 4n, 4n)

    @cached_property
    def torsion_parts(self):
        return torsion_components(self.geo.torsion_xi, self.geo.cs)

    @cached_property
    def hess_parts(self):
        """``([3], [-1], [3][0])`` parts of the symmetric horizontal Hessian."""
        return decompose_bilinear(self.hh, self._cs(self.K - 2), self.sublaplacian, self.n)

    # -- third order ----------------------------------------------------------------
    @cached_property
    def p_form(self) -> Jet:
        """P-form of ``f`` on the horizontal frame, shape ``(P, F, 4n)``."""
        self._need(3, "the P-form")
        if self.n < 2:
            raise UsageError("the P-form needs n >= 2")
        k = self.K - 3
        n, hd = self.n, self.hd
        N = _tr(self.nab3, k)[..., :hd, :hd, :hd]
        cs = _tr(self.geo.cs, k)
        t1 = _trace(N, -2, -1)
        m = einsum("pfcbd,ptdb->pftc", N, cs)  # sum_b,d N[c,b,d] cs[t,d,b]
        t2 = einsum("pftc,ptca->pfa", m, cs)
        df = _tr(self.grad, k)
        S = _tr(self.geo.S, k)
        T0, U = (_tr(t, k) for t in self.torsion_parts)
        out = t1 + t2 - (4 * n) * einsum("p,pfa->pfa", S, df)
        out = out + (4 * n) * einsum("pab,pfb->pfa", T0, df)
        return out - (8 * n * (n - 2) / (n - 1)) * einsum("pab,pfb->pfa", U, df)

    @cached_property
    def p_function(self) -> Jet:
        k = self.K - 3
        return einsum("pfa,pfa->pf", self.p_form, _tr(self.grad, k))

    @cached_property
    def c_operator(self) -> Jet:
        """``C f = sum_a (nabla_{e_a} P)(e_a)``."""
        self._need(4, "the C-operator")
        hd = self.hd
        P = self.p_form
        k = P.order - 1
        dP = self._d(P, k)[..., :hd, :hd]
        G = self._gamma(k)[:, :hd, :hd, :hd]
        return _trace(dP) - einsum("paab,pfb->pf", G, _tr(P, k))

    @cached_property
    def panon_lhs(self) -> Jet:
        """Divergence ``sum_a (nabla_{e_a} B)(e_a, X)`` of ``B = (nabla^2 f)_[3][0]``."""
        self._need(3, "the Hessian divergence")
        hd = self.hd
        B = self.hess_parts[2]
        k = B.order - 1
        dB = self._d(B, k)  # (P, F, a, b, c) = E_a B[b, c]
        G = self._gamma(k)[:, :hd, :hd, :hd]
        Bk = _tr(B, k)
        out = _trace(dB, 2, 3)
        out = out - einsum("paac,pfcx->pfx", G, Bk)
        return out - einsum("paxc,pfac->pfx", G, Bk)

    @cached_property
    def grad_norm2(self) -> Jet:
        return einsum("pfa,pfa->pf", self.grad, self.grad)

    @cached_property
    def xi_mix(self) -> Jet:
        """``sum_s nabla^2 f(xi_s, I_s grad f)``."""
        hd = self.hd
        k = self.K - 2
        Igrad = einsum("psca,pfa->pfsc", _tr(self.geo.cs, k), _tr(self.grad, k))
        return einsum("pfsc,pfsc->pf", self.hess[..., hd:, :hd], Igrad)

    @cached_property
    def xi_torsion_term(self) -> Jet:
        """``sum_s T(xi_s, I_s grad f, grad f)``."""
        k = self.K - 2
        grad = _tr(self.grad, k)
        Igrad = einsum("psca,pfa->pfsc", _tr(self.geo.cs, k), grad)
        tg = einsum("psab,pfb->pfsa", _tr(self.geo.torsion_xi, k), grad)
        return einsum("pfsa,pfsa->pf", tg, Igrad)

    @cached_property
    def bochner_residual(self) -> Jet:
        """Pointwise residual of the qc-Bochner formula on a torsion-free model.

        The left side is ``1/2 tr_H nabla^2 |grad f|^2``, that is minus one half
        of the sub-Laplacian (with ``Delta = -tr_H nabla^2``) of ``|grad f|^2``.
        """
        self._need(3, "the Bochner formula")
        n, hd = self.n, self.hd
        g2 = einsum("pfa,pfa->pf", self.grad, self.grad)
        lhs = -0.5 * self.sublaplacian_of(g2)
        k = 0
        hh = _tr(self.hh, k)
        grad = _tr(self.grad, k)
        dlap = self._d(self.sublaplacian, k)[..., :hd]
        S = _tr(self.geo.S, k)
        mix = _tr(self.xi_mix, k)
        rhs = einsum("pfab,pfab->pf", hh, hh) - einsum("pfa,pfa->pf", dlap, grad)
        rhs = rhs + (2 * (n + 2)) * einsum("p,pf->pf", S, _tr(g2, k)) + 4.0 * mix
        return _tr(lhs, k) - rhs


def _trace(t, a: int = -2, b: int = -1):
    """Trace over two axes of an array or jet."""
    if isinstance(t, Jet):
        c = np.trace(t.c, axis1=a % t.ndim, axis2=b % t.ndim)
        return Jet(c, t.dim, t.order)
    return np.trace(t, axis1=a, axis2=b)


def decompose_bilinear(B, cs, lap, n: int):
    """Invariant parts ``([3], [-1], [3][0])`` of the symmetric part of ``B``.

    ``cs`` holds the frame matrices of ``I_s`` broadcastable against ``B``
    and ``lap`` is the sub-Laplacian used for the trace correction.
    """
    sym = 0.5 * (B + B.swapaxes(-1, -2))
    p3 = 0.25 * (sym + frame_casimir_bilinear(sym, cs))
    pm = sym - p3
    eye = np.eye(4 * n)
    if isinstance(lap, Jet):
        p30 = p3 + einsum("pf,ab->pfab", lap, eye) * (1.0 / (4 * n))
    else:
        p30 = p3 + np.asarray(lap)[..., None, None] * eye / (4 * n)
    return p3, pm, p30


def ricci_identity_residuals(fc: FieldCalculus) -> dict[str, np.ndarray]:
    """Residuals (left minus right side) of the second and third order Ricci identities.

    Needs seed order 3.  Every entry has leading axes ``(P, F)``; the
    remaining axes enumerate frame slots.
    """
    fc._need(3, "the third-order Ricci identities")
    geo = fc.geo
    hd, H, V = fc.hd, slice(0, fc.hd), slice(fc.hd, geo.D)
    om = value_of(geo.omega)
    cs = value_of(geo.cs)
    R = value_of(geo.R)
    Tj = _tr(geo.T, 1)
    T = value_of(Tj)
    G = value_of(geo.gamma)
    df = value_of(fc.df)
    grad = df[..., H]
    vgrad = df[..., V]
    hs = value_of(fc.hess)
    N = value_of(fc.nab3)
    out = {}

    out["hessian-skew"] = (hs[..., H, H] - np.swapaxes(hs[..., H, H], -1, -2)) + 2 * np.einsum(
        "psxy,pfs->pfxy", om, vgrad
    )
    t_xi_grad = np.einsum("psxc,pfc->pfsx", T[:, V, H, H], grad)
    out["hessian-reeb-skew"] = np.swapaxes(hs[..., H, V], -1, -2) - hs[..., V, H] - t_xi_grad

    Rgrad = np.einsum("pxyzd,pfd->pfxyz", R[:, :, :, :, H], grad)
    third = N[..., H, H, H] - np.swapaxes(N[..., H, H, H], 2, 3)
    out["third-horizontal-skew"] = third + Rgrad[..., H, H, H] + 2 * np.einsum(
        "psxy,pfsz->pfxyz", om, hs[..., V, H]
    )

    rho = geo.rho[:, :, H, H]
    line4 = N[..., H, H, V] - np.swapaxes(N[..., H, H, V], 2, 3)
    rhs4 = -2 * np.einsum("psxy,pfsi->pfxyi", om, hs[..., V, V])
    for i, j, k in CYCLIC:
        rhs4[..., i] += -2 * np.einsum("pf,pxy->pfxy", vgrad[..., j], rho[:, k])
        rhs4[..., i] += 2 * np.einsum("pf,pxy->pfxy", vgrad[..., k], rho[:, j])
    out["third-mixed-skew"] = line4 - rhs4

    # nabla^2 f(T(xi_s, X), Y)
    hT = np.einsum("psxc,pfcy->pfsxy", T[:, V, H, :], hs[..., :, H])
    out["third-reeb-swap"] = N[..., V, H, H] - np.swapaxes(N[..., H, V, H], 2, 3) + Rgrad[..., V, H, H] + hT

    # (nabla_X T)(xi_s, Y) paired with df
    dT = value_of(geo.deriv(Tj, 0))  # E_A T[B, C, E]
    nT = dT - np.einsum("pabe,pecd->pabcd", G, T)
    nT = nT - np.einsum("pace,pbed->pabcd", G, T)
    nT = nT - np.einsum("pade,pbce->pabcd", G, T)
    dfnT = np.einsum("pxsyc,pfc->pfsxy", nT[:, H, V, H, :], df)
    xTy = np.einsum("psyc,pfxc->pfsxy", T[:, V, H, :], hs[..., H, :])
    cyc = N[..., V, H, H] - np.transpose(N[..., H, H, V], (0, 1, 4, 2, 3))
    out["third-reeb-cycle"] = cyc + hT + xTy + dfnT + Rgrad[..., V, H, H]

    trace = np.einsum("pfac,psca->pfs", hs[..., H, H], cs)
    out["complex-trace"] = trace + 4 * fc.n * vgrad
    return out


def divergence_quantity(fc: FieldCalculus) -> Jet:
    """Sub-Laplacian, whose integral vanishes."""
    return fc.sublaplacian


def reeb_mix_quantity(fc: FieldCalculus) -> Jet:
    """Integrand of the Reeb-mixing identity; integrates to zero."""
    vv = einsum("pfs,pfs->pf", fc.vgrad, fc.vgrad)
    return fc.xi_mix + (4 * fc.n) * vv.truncate(0) + fc.xi_torsion_term


def p_function_quantity(fc: FieldCalculus) -> Jet:
    """Integrand of the P-function identity on a torsion-free structure; integrates to zero."""
    n = fc.n
    lap = fc.sublaplacian.truncate(0)
    rhs = (-1 / (4 * n)) * fc.p_function - (1 / (4 * n)) * (lap * lap)
    rhs = rhs - einsum("p,pf->pf", fc.geo.S.truncate(0), fc.grad_norm2.truncate(0))
    return fc.xi_mix.truncate(0) - rhs


def paneitz_quantity(fc: FieldCalculus) -> Jet:
    """``f C f + P_f``; integrates to zero by parts."""
    return fc.F.truncate(0) * fc.c_operator + fc.p_function.truncate(0)


# name -> (pointwise quantity, seed order)
INTEGRAL_IDENTITIES: dict[str, tuple[Callable[[FieldCalculus], Jet], int]] = {
    "divergence": (divergence_quantity, 2),
    "reeb-mix": (reeb_mix_quantity, 2),
    "p-function": (p_function_quantity, 3),
    "paneitz": (paneitz_quantity, 4),
}


# -- single-point API ----------------------------------------------------------------


@dataclass(frozen=True)
class HessianData:
    hh: np.ndarray  # (4n, 4n) nabla^2 f(e_a, e_b)
    hv: np.ndarray  # (4n, 3) nabla^2 f(e_a, xi_s)
    vh: np.ndarray  # (3, 4n) nabla^2 f(xi_s, e_a)
    vv: np.ndarray  # (3, 3) nabla^2 f(xi_s, xi_t)
    grad: np.ndarray  # (4n,)
    vgrad: np.ndarray  # (3,) df(xi_s)

    @property
    def full(self) -> np.ndarray:
        return np.block([[self.hh, self.hv], [self.vh, self.vv]])


def _point(p) -> np.ndarray:
    return np.asarray(p.to_array() if hasattr(p, "to_array") else p, dtype=float)


def field_calculus(model: QCModel, f: ScalarField, p, order: int) -> FieldCalculus:
    geo = Geometry(model, _point(p)[None], order=order)
    return FieldCalculus(geo, [f])


def hessian(model: QCModel, f: ScalarField, p) -> HessianData:
    fc = field_calculus(model, f, p, 2)
    H = value_of(fc.hess)[0, 0]
    df = value_of(fc.df)[0, 0]
    hd = fc.hd
    return HessianData(H[:hd, :hd], H[:hd, hd:], H[hd:, :hd], H[hd:, hd:], df[:hd], df[hd:])


def sublaplacian(model: QCModel, f: ScalarField, p) -> float:
    return float(-np.trace(hessian(model, f, p).hh))


def riemannian_laplacian(model: QCModel, f: ScalarField, p) -> float:
    fc = field_calculus(model, f, p, 2)
    return float(value_of(fc.riemannian_laplacian)[0, 0])


def riemannian_hessian(model: QCModel, f: ScalarField, p) -> np.ndarray:
    """Levi-Civita Hessian on the full frame, assembled from the Biquard Hessian and the torsion."""
    fc = field_calculus(model, f, p, 2)
    return value_of(fc.hess_from_torsion)[0, 0]


def nabla3(model: QCModel, f: ScalarField, p, A: int, B: int, C: int) -> float:
    fc = field_calculus(model, f, p, 3)
    return float(value_of(fc.nab3)[0, 0, A, B, C])


def p_form(model: QCModel, f: ScalarField, p, X: int) -> float:
    fc = field_calculus(model, f, p, 3)
    return float(value_of(fc.p_form)[0, 0, X])


def c_operator(model: QCModel, f: ScalarField, p) -> float:
    fc = field_calculus(model, f, p, 4)
    return float(value_of(fc.c_operator)[0, 0])


def hess_decompose(hd: HessianData, frame) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``([3], [-1], [3][0])`` parts of the horizontal Hessian; ``frame`` supplies ``cs``."""
    cs = np.asarray(frame.cs, dtype=float)
    n = cs.shape[-1] // 4
    return decompose_bilinear(hd.hh, cs, -np.trace(hd.hh), n)


# -- Monte Carlo -------------------------------------------------------------------------


@dataclass(frozen=True)
class MCResult:
    estimate: float
    stderr: float
    samples: int

    @property
    def z(self) -> float:
        """Standard score of the estimate against zero."""
        return 0.0 if self.stderr == 0.0 else self.estimate / self.stderr


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("QCGEOM_THREADS", "1")))
    except ValueError:
        return 1


def mc_integrate(
    model: SphereModel,
    integrand: Callable[[np.ndarray], np.ndarray],
    samples: int,
    seed: int,
    chunk: int = 1000,
    workers: int | None = None,
) -> MCResult:
    """Mean of ``integrand`` over uniform sphere samples with its standard error.

    The normalized volume measure of ``h`` is used; ``Vol_eta`` differs from
    it by a constant factor, so vanishing integrals are tested unchanged.
    Chunk ``i`` draws from the ``i``-th spawned stream of ``seed``, which
    keeps the result independent of the worker count.
    """
    if not isinstance(model, SphereModel):
        raise UsageError("Monte-Carlo integration is defined on the sphere")
    if samples < 2:
        raise UsageError("need at least two samples")
    sizes = [min(chunk, samples - s) for s in range(0, samples, chunk)]
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(i: int) -> np.ndarray:
        pts = model.sample(np.random.default_rng(streams[i]), sizes[i])
        return np.asarray(integrand(pts), dtype=float).reshape(-1)

    workers = workers or worker_count()
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(i) for i in range(len(sizes))]
    vals = np.concatenate(parts)
    return MCResult(float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.size)), int(vals.size))


class TransportedIntegrand:
    """Pointwise invariant of a field, evaluated by moving the point to the base point.

    Right multiplication by ``Sp(n+1)`` preserves every ``eta_s`` of the
    sphere, so ``Q[f](L x0) = Q[f o L](x0)`` for invariant quantities ``Q``.
    One geometry at the base point then serves every sample.
    """

    def __init__(self, model: SphereModel, f: ScalarField, quantity: Callable[[FieldCalculus], Jet], order: int):
        self.model = model
        self.f = f
        self.quantity = quantity
        self.geo = Geometry(model, model.base_point()[None], order=order)

    def __call__(self, points: np.ndarray) -> np.ndarray:
        moved = [self.f.transformed(self.model.isometry_to(x)) for x in np.atleast_2d(points)]
        fc = FieldCalculus(self.geo, moved)
        return value_of(self.quantity(fc))[0]


def direct_integrand(model: QCModel, f: ScalarField, quantity: Callable[[FieldCalculus], Jet], order: int):
    """Same quantity computed with a fresh geometry at every point (reference path)."""

    def run(points: np.ndarray) -> np.ndarray:
        geo = Geometry(model, np.atleast_2d(points), order=order)
        return value_of(quantity(FieldCalculus(geo, [f])))[:, 0]

    return run


def volume_ratio(geo: Geometry) -> np.ndarray:
    """``Vol_eta / Vol_h`` on the orthonormal frame: ``(2n)! |Pf(omega_s)|`` for each ``s``."""
    om = value_of(geo.omega)
    pf = np.sqrt(np.abs(np.linalg.det(om)))
    return factorial(2 * geo.n) * pf
