"""Named verification suites: seeded sample points in, residual checks out.

Each suite function receives a :class:`SuiteConfig` and a :class:`Recorder`
and adds one :class:`CheckResult` per named check.  Residuals are
normalized as ``max|lhs - rhs| / (1 + max|operand|)`` unless a check says
otherwise.  Statistical checks report ``|z|`` against a threshold of 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import conformal as cf
from .biquard import CYCLIC, Geometry, curvature_data, lichnerowicz_tensor, three_sasakian_curvature
from .errors import UsageError
from .jet import einsum, seed, value_of
from .models import (
    HeisenbergModel,
    SphereModel,
    dilate_coords,
    frame_fields,
    gauge_norm_coords,
    heis_inverse_coords,
    heis_mul_coords,
    make_model,
    sphere_eta_coords,
    theta_coords,
)
from .operators import (
    INTEGRAL_IDENTITIES,
    FieldCalculus,
    ScalarField,
    TransportedIntegrand,
    mc_integrate,
    ricci_identity_residuals,
    volume_ratio,
)
from .tensor import casimir, casimir_project, exterior_d, exterior_d_jet

SUITES = ("models", "frames", "connection", "curvature", "obata", "conformal", "appendix", "integrals")
MODELS = ("heisenberg", "sphere")
SPHERE_ONLY = ("obata", "appendix", "integrals")
DEFAULT_SAMPLES = 50
DEFAULT_MC_SAMPLES = 20000
Z_LIMIT = 3.0

# Labels the checks point back to; every paper_ref must be one of these.
ANCHORS = frozenset(
    {
        "(bi1)", "(thirteen)", "(riem1)", "(torha)", "(xider)", "(lcbi)", "(qscs)", "(sp1curv)",
        "(sixtyfour)", "(hb)", "(qccurv)", "(propt)", "(need1)", "(d3n5)", "(eq7)", "(hes11)",
        "(hes12)", "(hes13)", "(hes14)", "(hes15)", "(hij)", "(vvvv5)", "(vvvv52)", "(nab3xi)",
        "(np1)", "(comp)", "(llex)", "(req18)", "(boh2)", "(xi1)", "(panon)", "(bohS)",
        "(d:def P)", "(condm-app)", "(div)", "(2)", "(e:gr4)", "(e:Heise multipl)",
        "(e:Heisenberg ctct forms)", "(e:stand cont form on S)", "(d:Cayley)", "(d:2nd Cayley)",
        "(d:inversion)", "(d:3-ctct auto)", "(e:Liouville conf factor)", "§1", "§2.1", "§2.2",
        "§2.3", "§2.4", "§2.5", "§3.10", "§ss:qc conf flat",
    }
)


@dataclass(frozen=True)
class CheckResult:
    name: str
    paper_ref: str
    max_residual: float
    tolerance: float
    samples: int
    passed: bool
    skipped: bool = False

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "paper_ref": self.paper_ref,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "samples": self.samples,
            "pass": self.passed,
            "skipped": self.skipped,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CheckResult":
        return cls(
            str(d["name"]),
            str(d["paper_ref"]),
            float(d["max_residual"]),
            float(d["tolerance"]),
            int(d["samples"]),
            bool(d["pass"]),
            bool(d.get("skipped", False)),
        )


@dataclass(frozen=True)
class SuiteConfig:
    n: int = 2
    seed: int = 42
    samples: int | None = None
    tol: float | None = None
    models: tuple[str, ...] = MODELS

    def count(self, suite: str) -> int:
        if self.samples is not None:
            return self.samples
        return DEFAULT_MC_SAMPLES if suite == "integrals" else DEFAULT_SAMPLES

    def rng(self, suite: str, model: str = "") -> np.random.Generator:
        key = (SUITES.index(suite), (("",) + MODELS).index(model))
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=key))


@dataclass
class Recorder:
    config: SuiteConfig
    prefix: str = ""
    results: list[CheckResult] = field(default_factory=list)

    def _name(self, name: str) -> str:
        return f"{self.prefix}{name}"

    def add(self, name: str, ref: str, residual: float, tol: float, samples: int, statistical: bool = False):
        if ref not in ANCHORS:
            raise ValueError(f"unknown reference label {ref!r}")
        if self.config.tol is not None and not statistical:
            tol = self.config.tol
        residual = float(residual)
        ok = bool(residual <= tol)  # NaN never passes
        self.results.append(CheckResult(self._name(name), ref, residual, float(tol), int(samples), ok))

    def skip(self, name: str, ref: str, tol: float):
        if self.config.tol is not None:
            tol = self.config.tol
        self.results.append(CheckResult(self._name(name), ref, 0.0, float(tol), 0, True, skipped=True))


def nres(diff, *operands) -> float:
    """``max|diff| / (1 + max|operand|)``."""
    d = float(np.max(np.abs(diff))) if np.size(diff) else 0.0
    s = max((float(np.max(np.abs(o))) for o in operands if np.size(o)), default=0.0)
    return d / (1.0 + s)


def _check_model_choice(suite: str, cfg: SuiteConfig) -> tuple[str, ...]:
    if suite in SPHERE_ONLY:
        if "sphere" not in cfg.models:
            raise UsageError(f"suite {suite!r} runs on the sphere only")
        return ("sphere",)
    return cfg.models


# -- models ---------------------------------------------------------------------------


def suite_models(cfg: SuiteConfig, rec: Recorder, model: str):
    M = make_model(model, cfg.n)
    N = cfg.count("models")
    pts = M.sample(cfg.rng("models", model), N)
    fr = frame_fields(M, seed(pts, 1))
    n, hd = M.n, M.hdim
    eta, xi, e = value_of(fr.eta), value_of(fr.xi), value_of(fr.horiz)
    deta = value_of(fr.deta)
    om = value_of(fr.omega)
    cs = value_of(fr.cs)

    rec.add("bi1-normalization", "(bi1)", nres(np.einsum("psm,ptm->pst", eta, xi) - np.eye(3), np.eye(3)), 1e-8, N)
    dxe = np.einsum("psij,pti,paj->psta", deta, xi, e)  # d eta_s(xi_t, e_a)
    own = np.einsum("pssa->psa", dxe)
    cross = dxe + np.swapaxes(dxe, 1, 2)
    rec.add("bi1-reeb-contraction", "(bi1)", nres(own, deta), 1e-8, N)
    rec.add("bi1-reeb-cross", "(bi1)", nres(cross, deta), 1e-8, N)

    # d eta recomputed pointwise by the tensor module, restricted to H, against 2 omega
    worst = 0.0
    for p in range(N):
        for s in range(3):
            d = exterior_d(lambda x, s=s: M.forms(x)[s], pts[p])
            worst = max(worst, nres(e[p] @ d @ e[p].T - 2 * om[p, s], om[p, s]))
    rec.add("thirteen-two-form", "(thirteen)", worst, 1e-8, N)

    eye = np.eye(hd)
    I = cs
    rel = [I[:, s] @ I[:, s] + eye for s in range(3)]
    for i, j, k in CYCLIC:
        rel.append(I[:, i] @ I[:, j] - I[:, k])
    rel.append(np.swapaxes(I, -1, -2) @ I - eye)  # g(I X, I Y) = g(X, Y)
    rec.add("quaternion-relations", "§2.1", max(nres(r, eye) for r in rel), 1e-8, N)

    # h = g + sum eta_s^2 on the full frame must be the identity
    G = fr.kappa * M.metric()
    E = np.concatenate([e, xi], axis=1)
    proj = np.eye(M.dim)[None] - np.einsum("psm,psk->pmk", xi, eta)
    EH = np.einsum("pAm,pkm->pAk", E, proj)
    h = np.einsum("pAm,mk,pBk->pAB", EH, G, EH) + np.einsum("psm,pAm,psk,pBk->pAB", eta, E, eta, E)
    rec.add("riem1-frame-gram", "(riem1)", nres(h - np.eye(M.mdim), np.eye(M.mdim)), 1e-8, N)
    if isinstance(M, SphereModel):
        # h on the tangent space against the round metric
        worst = 0.0
        for p in range(N):
            q, _ = np.linalg.qr(np.column_stack([pts[p], np.eye(M.dim)]))
            Tb = q[:, 1:]
            C = np.linalg.solve(E[p] @ E[p].T, E[p] @ Tb)  # frame components of the tangent basis
            worst = max(worst, nres(C.T @ h[p] @ C - np.eye(M.mdim), 1.0))
        rec.add("riem1-round-metric", "(riem1)", worst, 1e-8, N)
        rec.add("sphere-normalizations", "(e:stand cont form on S)", _normalization_check(M, pts), 1e-12, N)
        radial = np.abs(np.einsum("psm,pm->ps", eta, pts)).max()
        rec.add("sphere-form-radial", "(e:stand cont form on S)", radial, 1e-12, N)
    else:
        _group_checks(M, cfg, rec, pts)

    vr = volume_ratio(Geometry(M, pts, 2))
    rec.add("volume-ratio-constant", "§2.5", nres(vr - math.factorial(2 * n), vr), 1e-8, N)

    geo = Geometry(M, pts, 2)
    T0, U = geo.torsion_parts
    rec.add("torsion-T0-vanishes", "(propt)", np.abs(T0).max(), 1e-8, N)
    if n == 1:
        rec.skip("torsion-U-vanishes", "(propt)", 1e-8)
    else:
        rec.add("torsion-U-vanishes", "(propt)", np.abs(U).max(), 1e-8, N)


def _normalization_check(M: SphereModel, pts) -> float:
    doubled = sphere_eta_coords(pts, M.n, 1.0)
    sas = sphere_eta_coords(pts, M.n, 0.5)
    return float(np.abs(sas - 0.5 * doubled).max())


def _group_checks(M: HeisenbergModel, cfg: SuiteConfig, rec: Recorder, pts):
    n = M.n
    N = pts.shape[0]
    rng = cfg.rng("models", "heisenberg")
    a, b = M.sample(rng, N), M.sample(rng, N)
    c = pts
    ab_c = heis_mul_coords(heis_mul_coords(a, b, n), c, n)
    a_bc = heis_mul_coords(a, heis_mul_coords(b, c, n), n)
    zero = np.zeros_like(a)
    ident = np.abs(heis_mul_coords(a, zero, n) - a).max() + np.abs(heis_mul_coords(zero, a, n) - a).max()
    inv = np.abs(heis_mul_coords(a, heis_inverse_coords(a), n)).max()
    rec.add("group-associativity", "(e:Heise multipl)", nres(ab_c - a_bc, ab_c), 1e-12, N)
    rec.add("group-identity-inverse", "(e:Heise multipl)", ident + inv, 1e-12, N)
    t = 1.7
    hom = dilate_coords(heis_mul_coords(a, b, n), t, n) - heis_mul_coords(dilate_coords(a, t, n), dilate_coords(b, t, n), n)
    rec.add("dilation-automorphism", "(e:Heise multipl)", nres(hom, a, b), 1e-12, N)
    gh = gauge_norm_coords(dilate_coords(a, t, n), n) - t * gauge_norm_coords(a, n)
    rec.add("gauge-norm-homogeneity", "(e:Heise multipl)", nres(gh, gauge_norm_coords(a, n)), 1e-12, N)
    # left translation preserves the contact form
    worst = 0.0
    for p in range(N):
        y = seed(pts[p], 1)
        moved = heis_mul_coords(a[p], y, n)
        J = value_of(moved.grad())
        pulled = value_of(theta_coords(value_of(moved), n)) @ J
        worst = max(worst, nres(pulled - value_of(theta_coords(pts[p], n)), pulled))
    rec.add("theta-left-invariance", "(e:Heisenberg ctct forms)", worst, 1e-12, N)


# -- frames ---------------------------------------------------------------------------


def suite_frames(cfg: SuiteConfig, rec: Recorder, model: str):
    M = make_model(model, cfg.n)
    N = cfg.count("frames")
    rng = cfg.rng("frames", model)
    pts = M.sample(rng, N)
    hd = M.hdim

    # jet derivative of the frame against central differences with frozen pivots
    fr = frame_fields(M, seed(pts, 2))
    E1 = fr.full  # order 1
    v = rng.normal(size=pts.shape)
    if isinstance(M, SphereModel):
        v -= np.einsum("pm,pm->p", v, pts)[:, None] * pts
    v /= np.linalg.norm(v, axis=1)[:, None]
    jet_dir = np.einsum("pAmi,pi->pAm", value_of(E1.grad()), v)
    step = 1e-5
    plus = value_of(frame_fields(M, seed(pts + step * v, 1), pivots=fr.pivots).full)
    minus = value_of(frame_fields(M, seed(pts - step * v, 1), pivots=fr.pivots).full)
    fd = (plus - minus) / (2 * step)
    rec.add("frame-smoothness", "§2.1", nres(fd - jet_dir, jet_dir), 1e-6, N)

    geo = Geometry(M, pts, 2)
    c = value_of(geo.c)
    om = value_of(geo.omega)
    H, V = geo.H, geo.V
    rec.add("torha-vertical-bracket", "(torha)", nres(c[:, H, H, V] + 2 * np.moveaxis(om, 1, -1), om), 1e-8, N)
    rec.add("reeb-bracket-horizontal", "(sixtyfour)", float(geo.vertical_bracket_h.max()), 1e-8, N)
    if isinstance(M, SphereModel):
        rec.add("bracket-tangency", "§2.1", float(geo.radial_leak.max()), 1e-8, N)

    # exterior derivative: d(dF) = 0 and agreement with central differences
    F = ScalarField.random("cubic", M.dim, cfg.seed)
    x2 = seed(pts[: min(N, 10)], 2)
    dF = F(x2).grad()
    rec.add("exterior-d-squared", "§2.1", np.abs(value_of(exterior_d_jet(dF))).max(), 1e-10, min(N, 10))
    worst = 0.0
    forms = lambda x: M.forms(x)[0]  # noqa: E731
    for p in range(min(N, 10)):
        d = exterior_d(forms, pts[p])
        fd = np.empty_like(d)
        for i in range(M.dim):
            ei = np.zeros(M.dim)
            ei[i] = 1e-5
            fd[i] = (np.asarray(forms(pts[p] + ei)) - np.asarray(forms(pts[p] - ei))) / 2e-5
        worst = max(worst, nres(d - (fd - fd.T), d))
    rec.add("exterior-d-finite-difference", "(thirteen)", worst, 1e-6, min(N, 10))

    # invariant splitting of endomorphisms of H
    cs = value_of(geo.cs)[0]
    eye = np.eye(hd)
    cas = [nres(casimir(eye, cs) - 3 * eye, eye)]
    cas += [nres(casimir(cs[s], cs) + cs[s], cs[s]) for s in range(3)]
    psi = rng.normal(size=(hd, hd))
    dec = casimir_project(psi, cs)
    again = casimir_project(dec.part3, cs)
    cas.append(nres(again.partMinus1, psi))
    cas.append(nres(casimir(dec.part3, cs) - 3 * dec.part3, psi))
    cas.append(nres(casimir(dec.partMinus1, cs) + dec.partMinus1, psi))
    rec.add("casimir-eigenparts", "§2.2", max(cas), 1e-10, 1)
    if M.n == 1:
        sym = psi + psi.T
        p3 = casimir_project(sym, cs).part3
        rec.add("casimir-n1-symmetric", "§2.2", nres(p3 - np.trace(sym) / 4 * eye, sym), 1e-10, 1)


# -- connection -----------------------------------------------------------------------


def suite_connection(cfg: SuiteConfig, rec: Recorder, model: str):
    M = make_model(model, cfg.n)
    N = cfg.count("connection")
    pts = M.sample(cfg.rng("connection", model), N)
    geo = Geometry(M, pts, 3)
    hd, D = geo.hd, geo.D
    H, V = geo.H, geo.V
    G = value_of(geo.gamma)
    Gh = value_of(geo.gamma_h)
    c = value_of(geo.c)
    T = value_of(geo.T)

    rec.add("levi-civita-torsion-free", "(lcbi)", nres(Gh - np.swapaxes(Gh, 1, 2) - c, c), 1e-8, N)
    rec.add("levi-civita-metric", "(lcbi)", nres(Gh + np.swapaxes(Gh, 2, 3), Gh), 1e-8, N)

    # metric compatibility on coordinate fields expanded in the frame
    b = geo.frame.coframe(np.broadcast_to(np.eye(M.dim), (geo.P, M.dim, M.dim)))  # (P, i, A) order 2
    b1 = b.truncate(1)
    hb = einsum("piA,pjA->pij", b1, b1)
    lhs = value_of(geo.deriv(hb, 0))  # (P, A, i, j)
    db = value_of(geo.deriv(b1, 0))  # (P, A, i, F)
    b0 = value_of(b)
    nab = db + np.einsum("piD,pADF->pAiF", b0, G)
    rhs = np.einsum("pAiF,pjF->pAij", nab, b0) + np.einsum("piF,pAjF->pAij", b0, nab)
    rec.add("biquard-metric-compatibility", "(lcbi)", nres(lhs - rhs, lhs, rhs), 1e-8, N)

    rec.add("preserves-H-and-V", "(lcbi)", max(np.abs(G[:, :, H, V]).max(), np.abs(G[:, :, V, H]).max()), 1e-8, N)
    rec.add("torsion-self-consistency", "(lcbi)", nres(G - np.swapaxes(G, 1, 2) - c - T, T, c), 1e-8, N)
    rec.add("horizontal-torsion", "(torha)", nres(T[:, H, H, V] - 2 * np.moveaxis(value_of(geo.omega), 1, -1), T), 1e-8, N)
    rec.add("reeb-torsion-vanishes", "(need1)", np.abs(T[:, V, H, :]).max(), 1e-8, N)
    rec.add("S-two-pass-agreement", "(sixtyfour)", np.abs(geo.S1 - geo.S2).max(), 1e-7, N)

    # derivatives of I_s and xi_s through the sp(1) connection forms
    cs = value_of(geo.cs)
    dcs = value_of(geo.deriv(geo.cs.truncate(1), 0))
    nabI = dcs + np.einsum("pscb,pAcd->pAsdb", cs, G[:, :, H, H]) - np.einsum("pAbc,psdc->pAsdb", G[:, :, H, H], cs)
    al = value_of(geo.alpha)
    rI, rX = 0.0, 0.0
    for i, j, k in CYCLIC:
        rhs = -np.einsum("pA,pdb->pAdb", al[:, j], cs[:, k]) + np.einsum("pA,pdb->pAdb", al[:, k], cs[:, j])
        rI = max(rI, nres(nabI[:, :, i] - rhs, nabI))
        nx = G[:, :, hd + i, :]
        want = np.zeros_like(nx)
        want[:, :, hd + k] = -al[:, j]
        want[:, :, hd + j] = al[:, k]
        rX = max(rX, nres(nx - want, nx))
    rec.add("xider-complex-structures", "(xider)", rI, 1e-8, N)
    rec.add("xider-reeb-fields", "(xider)", rX, 1e-8, N)

    if isinstance(M, SphereModel):
        want = (4 * M.n + 2) * (4 * M.n + 3)
        rec.add("riemannian-scalar-curvature", "(riem1)", nres(geo.scal_h - want, want), 1e-7, N)


# -- curvature ------------------------------------------------------------------------


def suite_curvature(cfg: SuiteConfig, rec: Recorder, model: str):
    M = make_model(model, cfg.n)
    N = cfg.count("curvature")
    rng = cfg.rng("curvature", model)
    pts = M.sample(rng, N)
    geo = Geometry(M, pts, 3)
    n, hd = M.n, geo.hd
    H, V = geo.H, geo.V
    R = value_of(geo.R)
    S = geo.S2
    g = np.eye(hd)
    T0, U = geo.torsion_parts
    om = value_of(geo.omega)
    cs = value_of(geo.cs)
    Ric = geo.ricci[:, H, H]

    if isinstance(M, HeisenbergModel):
        rec.add("flat-curvature-vanishes", "§1", np.abs(R).max(), 1e-8, N)
        rec.add("flat-S-zero", "§1", np.abs(S).max(), 1e-8, N)
        rec.add("flat-ricci-vanishes", "(qscs)", np.abs(geo.ricci).max(), 1e-8, N)
        rec.add("flat-rho-zeta-vanish", "(qscs)", max(np.abs(geo.rho).max(), np.abs(geo.zeta).max()), 1e-8, N)
        rec.add("flat-T0-vanishes", "(propt)", np.abs(T0).max(), 1e-8, N)
        if n == 1:
            rec.skip("flat-U-vanishes", "(propt)", 1e-8)
        else:
            rec.add("flat-U-vanishes", "(propt)", np.abs(U).max(), 1e-8, N)
        return

    rec.add("S-constant-2", "(sixtyfour)", np.abs(S - 2.0).max(), 1e-7, N)
    rec.add("qc-ricci-einstein", "(sixtyfour)", nres(Ric - 4 * (n + 2) * g, Ric), 1e-7, N)
    rec.add("torsion-T0-vanishes", "§2.3", np.abs(T0).max(), 1e-7, N)
    if n == 1:
        rec.skip("torsion-U-vanishes", "§2.3", 1e-7)
    else:
        rec.add("torsion-U-vanishes", "§2.3", np.abs(U).max(), 1e-7, N)

    hb = three_sasakian_curvature(om)
    Rh = R[:, H, H, H, H]
    rec.add("hb-slot-by-slot", "(hb)", nres(Rh - hb, hb), 1e-7, N)
    # 50 random frame quadruples, evaluated slot by slot
    idx = rng.integers(0, hd, size=(50, 4))
    pi = rng.integers(0, N, size=50)
    quad = Rh[pi, idx[:, 0], idx[:, 1], idx[:, 2], idx[:, 3]] - hb[pi, idx[:, 0], idx[:, 1], idx[:, 2], idx[:, 3]]
    rec.add("hb-random-quadruples", "(hb)", np.abs(quad).max(), 1e-7, 50)

    # sectional values: 4 on quaternionic lines, 1 on totally real planes
    X = np.zeros(hd)
    X[0] = 1.0
    Y = cs[0, 0] @ X
    quat_line = np.einsum("xyzv,x,y,z,v->", Rh[0], X, Y, Y, X)
    sectional = abs(quat_line - 4)
    if n >= 2:
        # a unit vector orthogonal to the quaternionic line of X
        span = np.column_stack([X] + [cs[0, s] @ X for s in range(3)])
        Q, _ = np.linalg.qr(np.column_stack([span, np.eye(hd)]))
        Z = Q[:, 4]
        sectional = max(sectional, abs(np.einsum("xyzv,x,y,z,v->", Rh[0], X, Z, Z, X) - 1))
    rec.add("hb-sectional-values", "(hb)", sectional, 1e-7, 1)

    rec.add("reeb-curvature-vanishes", "(d3n5)", np.abs(R[:, V, H, H, H]).max(), 1e-7, N)
    sp = max(np.abs(R[:, :, :, hd + i, hd + j] - 2 * geo.rho[:, k]).max() for i, j, k in CYCLIC)
    rec.add("sp1-curvature", "(sp1curv)", sp, 1e-7, N)
    rec.add("rho-horizontal", "(sixtyfour)", nres(geo.rho[:, :, H, H] + S[:, None, None, None] * om, om), 1e-7, N)
    qscs = np.einsum("pbaab->p", Rh) - 8 * n * (n + 2) * S
    rec.add("qc-scalar-trace", "(qscs)", nres(qscs, 8 * n * (n + 2) * S), 1e-10, N)

    W = cf.wqc_tensor(R, cs, om)
    rec.add("wqc-vanishes", "(qccurv)", np.abs(W).max(), 1e-7, N)
    rec.add("wqc-antisymmetry", "(qccurv)", np.abs(W + np.swapaxes(W, 1, 2)).max(), 1e-10, N)
    rec.add("wqc-closed-form-input", "(qccurv)", np.abs(cf.wqc_tensor(hb, cs, om)).max(), 1e-10, N)

    if n >= 2:
        worst = 0.0
        for p in range(N):
            cd = curvature_data(geo, p)
            Xr = rng.normal(size=hd)
            worst = max(worst, abs(lichnerowicz_tensor(cd, Xr, n) - 4 * (n + 2) * Xr @ Xr) / (1 + Xr @ Xr))
        rec.add("lichnerowicz-constant", "(condm-app)", worst, 1e-7, N)
    else:
        rec.skip("lichnerowicz-constant", "(condm-app)", 1e-7)

    few = pts[: min(N, 3)]
    deep = Geometry(M, few, 4)
    dS = value_of(deep.deriv(deep.S, 0))
    rec.add("S-derivative-vanishes", "(sixtyfour)", np.abs(dS).max(), 1e-8, few.shape[0])


# -- obata ---------------------------------------------------------------------------


def suite_obata(cfg: SuiteConfig, rec: Recorder, model: str = "sphere"):
    M = SphereModel(cfg.n)
    N = cfg.count("obata")
    pts = M.sample(cfg.rng("obata", "sphere"), N)
    n, hd, m = M.n, M.hdim, M.dim
    geo = Geometry(M, pts, 3)
    fields = [ScalarField.coordinate(m, i) for i in range(m)]
    fc = FieldCalculus(geo, fields)
    H, V = geo.H, geo.V
    f = value_of(fc.F)
    df = value_of(fc.df)
    grad, vgrad = df[..., H], df[..., V]
    hs = value_of(fc.hess)
    hh = hs[..., H, H]
    om = value_of(geo.omega)
    cs = value_of(geo.cs)
    S = geo.S2
    g = np.eye(hd)
    samples = N * m

    rec.add("S-constant-2", "(sixtyfour)", np.abs(S - 2.0).max(), 1e-8, N)
    lap = value_of(fc.sublaplacian)
    rec.add("Δf=4nf", "(eq7)", float(np.max(np.abs(lap - 4 * n * f) / (1 + np.abs(f)))), 1e-9, samples)
    eq7 = hh + np.einsum("pf,ab->pfab", f, g) + np.einsum("pfs,psab->pfab", vgrad, om)
    rec.add("eq7-residual", "(eq7)", nres(eq7, hh), 1e-8, samples)

    hR = value_of(fc.hess_riemannian)
    want = -np.einsum("pf,AB->pfAB", f, np.eye(geo.D))
    rec.add("hes12-obata", "(hes12)", nres(hR - want, hR), 1e-8, samples)
    rec.add("hes11-assembly", "(hes11)", nres(value_of(fc.hess_from_torsion) - hR, hR), 1e-8, samples)
    rec.add("hes13-mixed", "(hes13)", nres(hR[..., H, V], hR), 1e-8, samples)
    diag = np.einsum("pfss->pfs", hs[..., V, V])
    rec.add("hes14-reeb-diagonal", "(hes14)", nres(diag + f[..., None], f), 1e-8, samples)
    off = hR[..., V, V] * (1 - np.eye(3))
    rec.add("hes15-reeb-offdiagonal", "(hes15)", nres(off, hR), 1e-8, samples)
    hij = 0.0
    for i, j, k in CYCLIC:
        hij = max(hij, nres(hs[..., V, V][..., j, i] - (1 - S[:, None]) * vgrad[..., k], vgrad))
    rec.add("hij-reeb-pairs", "(hij)", hij, 1e-8, samples)

    # df(I_s e_a) = sum_c cs[s, c, a] df(e_c)
    IZ = np.einsum("psca,pfc->pfsa", cs, grad)
    rec.add("vvvv52-hessian-reeb", "(vvvv52)", nres(np.swapaxes(hs[..., H, V], -1, -2) - IZ, IZ), 1e-8, samples)
    # nabla df(xi_i, I_i Z) = -df(Z)
    hIZ = np.einsum("pfsc,psca->pfsa", hs[..., V, H], cs)
    rec.add("vvvv5-reeb-complex", "(vvvv5)", nres(hIZ + grad[:, :, None, :], grad), 1e-8, samples)

    N3 = value_of(fc.nab3)
    pred = -np.einsum("pfA,xy->pfAxy", df, g) - np.einsum("psxy,pfAs->pfAxy", om, hs[..., :, V])
    rec.add("nab3xi-third-derivative", "(nab3xi)", nres(N3[..., H, H] - pred, pred), 1e-8, samples)

    p30 = value_of(fc.hess_parts[2])
    rec.add("np1-tracefree-part", "(np1)", np.abs(p30).max(), 1e-9, samples)
    lam, k0 = 4 * n, 4 * (n + 2)
    rec.add("lambda-equality", "(eq7)", abs(lam - n / (n + 2) * k0), 0.0, 1)
    lapR = value_of(fc.riemannian_laplacian)
    rec.add("llex-riemannian-eigenvalue", "(llex)", nres(lapR - (4 * n + 3) * f, f), 1e-8, samples)
    rec.add("req18-laplacians", "(req18)", nres(lapR - lap + np.einsum("pfss->pf", hs[..., V, V]), lapR), 1e-9, samples)

    if n >= 2:
        P = value_of(fc.p_form)
        rec.add("P-form-vanishes-linear", "(d:def P)", np.abs(P).max(), 1e-8, samples)
    else:
        rec.skip("P-form-vanishes-linear", "(d:def P)", 1e-8)


# -- appendix ------------------------------------------------------------------------


def _test_functions(cfg: SuiteConfig, m: int, count: int, families=("quadratic", "cubic")) -> list[ScalarField]:
    return [ScalarField.random(families[i % len(families)], m, cfg.seed * 1000 + i) for i in range(count)]


def suite_appendix(cfg: SuiteConfig, rec: Recorder, model: str = "sphere"):
    M = SphereModel(cfg.n)
    n, m = M.n, M.dim
    rng = cfg.rng("appendix", "sphere")
    P = min(cfg.count("appendix"), 20)
    pts = M.sample(rng, P)
    geo = Geometry(M, pts, 3)

    # Ricci identities on quadratic and cubic functions
    fields = _test_functions(cfg, m, 20)
    fc = FieldCalculus(geo, fields)
    res = ricci_identity_residuals(fc)
    scale = 1.0 + float(np.abs(value_of(fc.nab3)).max())
    samples = P * len(fields)
    labels = {
        "hessian-skew": "boh2-line1",
        "hessian-reeb-skew": "boh2-line2",
        "third-horizontal-skew": "boh2-line3",
        "third-mixed-skew": "boh2-line4",
        "third-reeb-swap": "boh2-line5",
        "third-reeb-cycle": "boh2-line6",
    }
    for key, name in labels.items():
        rec.add(name, "(boh2)", float(np.abs(res[key]).max()) / scale, 1e-7, samples)
    rec.add("xi1-complex-trace", "(xi1)", float(np.abs(res["complex-trace"]).max()) / scale, 1e-7, samples)

    # invariant parts of the Hessian
    hh = value_of(fc.hh)
    p3, pm, p30 = (value_of(t) for t in fc.hess_parts)
    sym = 0.5 * (hh + np.swapaxes(hh, -1, -2))
    comp = max(
        nres(p3 + pm - sym, sym),
        nres(np.einsum("pfab,pfab->pf", p3, pm), sym * sym),
        nres(p3 - value_of(fc.hess_parts[0]), sym),
    )
    rec.add("comp-hessian-parts", "(comp)", comp, 1e-10, samples)
    tr30 = np.einsum("pfaa->pf", p30)
    rec.add("np1-trace-free", "(np1)", nres(tr30, sym), 1e-10, samples)

    quad = [ScalarField.random("quadratic", m, cfg.seed * 1000 + 100 + i) for i in range(20)]
    fq = FieldCalculus(geo, quad)
    rec.add("bohS-bochner", "(bohS)", nres(value_of(fq.bochner_residual), value_of(fq.hh) ** 2), 1e-7, P * 20)
    if n >= 2:
        lhs = value_of(fq.panon_lhs)
        rhs = (n - 1) / (4 * n) * value_of(fq.p_form)
        rec.add("panon-divergence", "(panon)", nres(lhs - rhs, lhs, rhs), 1e-7, P * 20)
        lin = FieldCalculus(geo, [ScalarField.coordinate(m, i) for i in range(m)])
        rec.add("P-form-linear", "(d:def P)", np.abs(value_of(lin.p_form)).max(), 1e-8, P * m)
        few = Geometry(M, pts[:2], 4)
        cl = FieldCalculus(few, [ScalarField.coordinate(m, i) for i in range(3)])
        rec.add("C-operator-linear", "(d:def P)", np.abs(value_of(cl.c_operator)).max(), 1e-8, 6)
    else:
        for name in ("panon-divergence", "P-form-linear", "C-operator-linear"):
            rec.skip(name, "(panon)" if name.startswith("panon") else "(d:def P)", 1e-8)


# -- conformal -----------------------------------------------------------------------


def suite_conformal(cfg: SuiteConfig, rec: Recorder, model: str = ""):
    n = cfg.n
    N = cfg.count("conformal")
    rng = cfg.rng("conformal", "")
    S, Hm = SphereModel(n), HeisenbergModel(n)
    xs = S.sample(rng, N)
    ys = Hm.sample(rng, N, avoid_origin=True)

    rt = max(np.abs(cf.cayley_inv_coords(cf.cayley_coords(x)) - x).max() for x in xs)
    rec.add("cayley-inverse-pair", "(d:Cayley)", rt, 1e-12, N)
    q = np.zeros(4 * n + 4)
    q[0] = 1.0
    got = cf.cayley_coords(q)
    # (q', p') = (q', 0) with |q'| = 1 lands on (q, p) = (q', 1): |q|^2 = 1, omega = 0
    want = np.zeros(4 * n + 3)
    want[0] = 1.0
    rec.add("cayley-example", "(d:Cayley)", np.abs(got - want).max(), 1e-12, 1)
    got2 = cf.cayley2_coords(q)
    rec.add("cayley2-example", "(d:2nd Cayley)", np.abs(got2 + want).max(), 1e-12, 1)
    y0 = np.zeros(4 * n + 3)
    y0[4 * n] = 1.0
    rec.add("inversion-example", "(d:inversion)", np.abs(cf.inversion_coords(y0) + y0).max(), 1e-12, 1)

    sigma = cf.compose(cf.cayley_inv_coords, cf.cayley2_coords)
    rec.add("inversion-from-cayley-pair", "(d:inversion)", max(nres(sigma(y) - cf.inversion_coords(y), y) for y in ys), 1e-10, N)
    rec.add("inversion-involution", "(d:inversion)", max(np.abs(cf.inversion_coords(cf.inversion_coords(y)) - y).max() for y in ys), 1e-10, N)

    fit_c, fac_c, rot_c = 0.0, 0.0, 0.0
    fit_i, fac_i, rot_i = 0.0, 0.0, 0.0
    for y in ys:
        cert = cf.pullback_certificate(cf.cayley_inv_coords, cf.group_forms, cf.sphere_forms(1.0), y, False)
        f, lam = cf.cayley_expected(y)
        fit_c = max(fit_c, cert.residual)
        fac_c = max(fac_c, abs(cert.factor - f) / (1 + f))
        rot_c = max(rot_c, _direct_residual(cf.cayley_inv_coords, cf.sphere_forms(1.0), y, f, lam.conj()))
        cert = cf.pullback_certificate(cf.inversion_coords, cf.group_forms, cf.group_forms, y, False)
        f, mu = cf.inversion_expected(y)
        fit_i = max(fit_i, cert.residual)
        fac_i = max(fac_i, abs(cert.factor - f) / (1 + f))
        rot_i = max(rot_i, _direct_residual(cf.inversion_coords, cf.group_forms, y, f, mu.conj()))
    rec.add("cayley-certificate-fit", "§ss:qc conf flat", fit_c, 1e-8, N)
    rec.add("cayley-certificate-factor", "§ss:qc conf flat", fac_c, 1e-8, N)
    rec.add("cayley-certificate-rotor", "§ss:qc conf flat", rot_c, 1e-8, N)
    rec.add("inversion-certificate-fit", "(d:inversion)", fit_i, 1e-8, N)
    rec.add("inversion-certificate-factor", "(d:inversion)", fac_i, 1e-8, N)
    rec.add("inversion-certificate-rotor", "(d:inversion)", rot_i, 1e-8, N)

    a = Hm.sample(rng, 1)[0]
    t = 1.7
    trivial = []
    for fmap, factor in ((cf.compose(), 1.0), (cf.dilation_coords(t), t * t), (cf.translation_coords(a), 1.0)):
        cert = cf.pullback_certificate(fmap, cf.group_forms, cf.group_forms, ys[0], False)
        rotor = np.array(cert.rotor.components)
        trivial.append(max(cert.residual, abs(cert.factor - factor), np.abs(rotor - [1, 0, 0, 0]).max()))
    rec.add("generator-certificates", "(d:3-ctct auto)", max(trivial), 1e-9, 3)

    Gm = cf.compose(cf.translation_coords(a), cf.dilation_coords(t))
    law = 0.0
    for y in ys[: min(N, 10)]:
        whole = cf.pullback_certificate(cf.compose(Gm, cf.inversion_coords), cf.group_forms, cf.group_forms, y, False)
        inner = cf.pullback_certificate(Gm, cf.group_forms, cf.group_forms, y, False)
        outer = cf.pullback_certificate(cf.inversion_coords, cf.group_forms, cf.group_forms, Gm(y), False)
        law = max(law, abs(whole.factor - outer.factor * inner.factor) / abs(whole.factor))
    rec.add("factor-composition-law", "(d:3-ctct auto)", law, 1e-9, min(N, 10))

    F = cf.compose(cf.translation_coords(a), cf.inversion_coords, cf.dilation_coords(t))
    lp = Hm.sample(rng, 50, avoid_origin=True)
    vals = np.array([1.0 / (2.0 * cf.pullback_certificate(F, cf.group_forms, cf.group_forms, y, False).factor) for y in lp])
    fit = cf.fit_liouville(lp, vals, n, seed_=cfg.seed)
    rec.add("liouville-fit", "(e:Liouville conf factor)", fit.residual, 1e-7, 50)
    rec.add("liouville-sigma-zero", "(e:Liouville conf factor)", abs(fit.params.sigma), 1e-6, 50)
    origin = cf.liouville_mu(cf.LiouvilleParams(1.0, 1.0, np.zeros((n, 4)), np.zeros(3)), np.zeros(4 * n + 3))
    rec.add("liouville-origin-example", "(e:Liouville conf factor)", abs(origin - 1.0), 1e-14, 1)


def _direct_residual(fmap, target_forms, y, factor, lam) -> float:
    """``max |F^* target - factor * rot(lam) . Theta|`` with no fitting."""
    Y = fmap(seed(y, 1))
    J = value_of(Y.grad())
    A = np.asarray(value_of(target_forms(value_of(Y)))) @ J
    B = np.asarray(value_of(cf.group_forms(y)))
    return float(np.abs(A - factor * cf.rotation_of(lam) @ B).max())


# -- integrals ------------------------------------------------------------------------


def suite_integrals(cfg: SuiteConfig, rec: Recorder, model: str = "sphere"):
    M = SphereModel(cfg.n)
    N = cfg.count("integrals")
    refs = {"divergence": "(div)", "reeb-mix": "(2)", "p-function": "(e:gr4)", "paneitz": "(d:def P)"}
    f = ScalarField.random("quadratic", M.dim, cfg.seed)
    for name, (quantity, order) in INTEGRAL_IDENTITIES.items():
        count = N if name != "paneitz" else max(N // 10, 2)
        if cfg.n < 2 and name in ("p-function", "paneitz"):
            rec.skip(f"mc-{name}", refs[name], Z_LIMIT)
            continue
        r = mc_integrate(M, TransportedIntegrand(M, f, quantity, order), count, cfg.seed)
        rec.add(f"mc-{name}", refs[name], abs(r.z), Z_LIMIT, count, statistical=True)


RUNNERS = {
    "models": suite_models,
    "frames": suite_frames,
    "connection": suite_connection,
    "curvature": suite_curvature,
    "obata": suite_obata,
    "conformal": suite_conformal,
    "appendix": suite_appendix,
    "integrals": suite_integrals,
}


def run_checks(suite: str, cfg: SuiteConfig) -> list[CheckResult]:
    """Run one named suite (or ``all``) and return its checks sorted by name."""
    if suite == "all":
        names = [s for s in SUITES if s not in SPHERE_ONLY or "sphere" in cfg.models]
        out = []
        for s in names:
            out += [CheckResult(f"{s}/{r.name}", *_fields(r)[1:]) for r in run_checks(s, cfg)]
        return sorted(out, key=lambda r: r.name)
    if suite not in RUNNERS:
        raise UsageError(f"unknown suite {suite!r}")
    results: list[CheckResult] = []
    if suite == "conformal":
        rec = Recorder(cfg)
        suite_conformal(cfg, rec)
        results = rec.results
    else:
        models = _check_model_choice(suite, cfg)
        for model in models:
            prefix = f"{model}:" if suite not in SPHERE_ONLY else ""
            rec = Recorder(cfg, prefix)
            RUNNERS[suite](cfg, rec, model)
            results += rec.results
    return sorted(results, key=lambda r: r.name)


def _fields(r: CheckResult) -> tuple:
    return (r.name, r.paper_ref, r.max_residual, r.tolerance, r.samples, r.passed, r.skipped)


def calibrations(cfg: SuiteConfig) -> dict[str, float]:
    return {m: make_model(m, cfg.n).calibration for m in cfg.models}


__all__ = [
    "ANCHORS",
    "CheckResult",
    "Recorder",
    "SuiteConfig",
    "SUITES",
    "calibrations",
    "nres",
    "run_checks",
]
