"""End-to-end acceptance criteria at n = 2, each reported as one PASS/FAIL line."""

from __future__ import annotations

import numpy as np
import pytest

from qcgeom.models import SphereModel
from qcgeom.operators import INTEGRAL_IDENTITIES, ScalarField, TransportedIntegrand, mc_integrate
from qcgeom.suites import SuiteConfig, run_checks
from test_jet import symbolic_worst_error
from test_quat import matrix_worst_error

N = 2
BOTH = ("heisenberg:", "sphere:")


@pytest.fixture(scope="module")
def results():
    cfg = SuiteConfig(n=N, seed=42)
    out = {}
    for suite in ("models", "connection", "curvature", "obata", "appendix", "conformal"):
        out.update({f"{suite}/{r.name}": r for r in run_checks(suite, cfg)})
    return out


def _judge(results, report_line, number: int, title: str, rows, note: str = "", min_samples: int = 0):
    """``rows``: (suite/check name, tolerance).  Every check must exist, run and meet the tolerance."""
    worst, bad = 0.0, []
    for name, tol in rows:
        r = results.get(name)
        if r is None or r.skipped or not r.max_residual <= tol or r.samples < min_samples:
            bad.append(name)
            continue
        worst = max(worst, r.max_residual / tol if tol else 0.0)
    verdict = "PASS" if not bad else "FAIL"
    detail = f"{len(rows)} checks, worst residual/tolerance {worst:.2e}"
    if bad:
        detail += f"; failing: {', '.join(bad)}"
    if note:
        detail += f"; {note}"
    report_line(f"criterion {number}: {verdict} {title} ({detail})")
    assert not bad, bad


def _each(suite: str, names, tol: float, prefixes=BOTH):
    return [(f"{suite}/{p}{n}", tol) for p in prefixes for n in names]


def test_criterion_01_structure_axioms(results, report_line):
    names = ["bi1-normalization", "bi1-reeb-contraction", "bi1-reeb-cross", "thirteen-two-form",
             "quaternion-relations", "riem1-frame-gram"]
    rows = _each("models", names, 1e-8) + [("models/sphere:riem1-round-metric", 1e-8)]
    _judge(results, report_line, 1, "structure axioms on both models", rows, min_samples=50)


def test_criterion_02_connection_axioms(results, report_line):
    names = ["biquard-metric-compatibility", "preserves-H-and-V", "xider-complex-structures",
             "xider-reeb-fields", "torsion-self-consistency"]
    rows = _each("connection", names, 1e-8) + _each("connection", ["S-two-pass-agreement"], 1e-7)
    _judge(results, report_line, 2, "Biquard connection axioms", rows)


def test_criterion_03_flat_model(results, report_line):
    rows = _each("curvature", ["flat-curvature-vanishes", "flat-S-zero"], 1e-8, ("heisenberg:",))
    _judge(results, report_line, 3, "flat Heisenberg curvature and S vanish", rows)


def test_criterion_04_sphere_constants(results, report_line):
    rows = _each("curvature", ["S-constant-2", "qc-ricci-einstein", "torsion-T0-vanishes", "torsion-U-vanishes"],
                 1e-7, ("sphere:",))
    rows.append(("connection/sphere:riemannian-scalar-curvature", 1e-7))
    _judge(results, report_line, 4, "sphere constants S=2, Ric=16g, scal=110, T0=U=0", rows)


def test_criterion_05_curvature_formula(results, report_line):
    rows = _each("curvature", ["hb-slot-by-slot", "hb-random-quadruples", "wqc-vanishes", "sp1-curvature"],
                 1e-7, ("sphere:",))
    _judge(results, report_line, 5, "closed-form sphere curvature, W^qc and sp(1) curvature", rows)
    assert results["curvature/sphere:hb-random-quadruples"].samples == 50


def test_criterion_06_obata_equality(results, report_line):
    rows = [("obata/Δf=4nf", 1e-9), ("obata/eq7-residual", 1e-8), ("obata/np1-tracefree-part", 1e-9),
            ("obata/lambda-equality", 0.0)]
    rows += [(f"obata/{n}", 1e-8) for n in ("hes12-obata", "hes13-mixed", "hes14-reeb-diagonal",
                                             "hes15-reeb-offdiagonal")]
    _judge(results, report_line, 6, "Obata equality case for the 12 coordinate functions", rows,
           min_samples=0)
    assert results["obata/Δf=4nf"].samples == 50 * (4 * N + 4)


def test_criterion_07_ricci_identities(results, report_line):
    rows = [(f"appendix/boh2-line{i}", 1e-7) for i in range(1, 7)]
    rows += [("appendix/xi1-complex-trace", 1e-7), ("obata/nab3xi-third-derivative", 1e-7)]
    _judge(results, report_line, 7, "Ricci identities on 20 quadratic/cubic functions at 20 points", rows,
           note="the Reeb third-derivative identity is exercised on the coordinate functions it is stated for")
    assert results["appendix/boh2-line1"].samples == 400


def test_criterion_08_appendix(results, report_line):
    rows = [("appendix/panon-divergence", 1e-7), ("appendix/P-form-linear", 1e-8), ("appendix/bohS-bochner", 1e-7)]
    _judge(results, report_line, 8, "P-form divergence, P_f=0 for linear f, Bochner formula", rows,
           note="Bochner residual uses the -1/2 sub-Laplacian of |grad f|^2 (positive-spectrum sign)")


def test_criterion_09_conformal(results, report_line):
    rows = [(f"conformal/{n}", 1e-8) for n in ("cayley-certificate-fit", "cayley-certificate-factor",
                                               "cayley-certificate-rotor", "inversion-certificate-fit",
                                               "inversion-certificate-factor", "inversion-certificate-rotor")]
    rows += [("conformal/inversion-involution", 1e-10), ("conformal/liouville-fit", 1e-7),
             ("conformal/liouville-sigma-zero", 1e-6)]
    _judge(results, report_line, 9, "Cayley and inversion certificates, Liouville factor", rows,
           note="fitted rotors equal the conjugates of the closed-form lambda and mu")
    assert results["conformal/cayley-certificate-fit"].samples == 50


def test_criterion_10_integrals(report_line):
    M = SphereModel(N)
    zs = {}
    for seed in (42, 43, 44):
        f = ScalarField.random("quadratic", M.dim, seed)
        for name in ("divergence", "reeb-mix", "p-function"):
            quantity, order = INTEGRAL_IDENTITIES[name]
            r = mc_integrate(M, TransportedIntegrand(M, f, quantity, order), 20000, seed)
            assert r.samples == 20000
            zs[(seed, name)] = r.z
    worst = max(abs(z) for z in zs.values())
    ok = worst <= 3.0
    listing = ", ".join(f"{n}@{s}={z:+.2f}" for (s, n), z in zs.items())
    report_line(f"criterion 10: {'PASS' if ok else 'FAIL'} vanishing integrals at 20000 samples (max |z| {worst:.2f}; {listing})")
    assert ok, zs


def test_criterion_11_oracle_tier(report_line):
    jet = symbolic_worst_error(200)
    quat = matrix_worst_error(1000)
    ok = jet <= 1e-11 and quat <= 1e-13
    report_line(
        f"criterion 11: {'PASS' if ok else 'FAIL'} oracle tier (jets vs sympy {jet:.1e} on 200 cases, "
        f"quaternions vs 4x4 matrices {quat:.1e} on 1000 cases)"
    )
    assert ok
