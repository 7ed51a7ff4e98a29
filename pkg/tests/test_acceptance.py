"""Acceptance criteria 1-10.  Each test prints one ``criterion N: PASS|FAIL`` line."""

import math
import os
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from exactred.contact import ContactStructure, reeb_field_at
from exactred.flows import commutation_defect, proportionality
from exactred.geometry import KForm, PullbackForm, VectorField
from exactred.liegroup import closure_residual, compute_k_mu, momentum_at, subspace_distance
from exactred.pipeline import Context
from exactred.reduction import (
    contact_reduce, energy_hypersurface, equivalence_check, induced_contact_symmetry,
    k_mu_fields, symplectic_reduce,
)
from exactred.sampling import sample_box
from exactred.scenario import load_scenario

from test_liegroup import random_algebra, sphere_scan_k_mu

SEED = 42
TESTS = Path(__file__).parent


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail
    return emit


def worst(values):
    return max(float(v) for v in values)


def reduction_b(sc, ctx):
    q = sc.pipeline_b.quotient
    basis = compute_k_mu(sc.symmetry, sc.mu)
    kfields = k_mu_fields(sc.symmetry, q, basis)
    stage = symplectic_reduce(sc.system, sc.symmetry, q, basis, ctx.points(q.total.chart),
                              ctx.points(q.base), ctx.fibers(q.total.chart, kfields),
                              sc.tolerances)
    return stage


def reduction_a(sc, ctx):
    data = sc.pipeline_a
    cs = energy_hypersurface(sc.system, data.level, []).value
    sym_s = induced_contact_symmetry(sc.symmetry, data.level, sc.system.theta,
                                     sc.system.hamiltonian, []).value
    basis = compute_k_mu(sym_s, sc.mu)
    return contact_reduce(cs, sym_s, data.quotient, basis, [], [], []).value


def test_criterion_1_example2_symplectic_reduction(verdict):
    sc = load_scenario("example2")
    ctx = Context(sc, SEED)
    P = sc.system.chart
    pts = sample_box(P, sc.boxes["P"], 100, SEED, "criterion1")
    j_res = worst(np.max(np.abs(momentum_at(sc.symmetry, sc.system.theta, x)
                                - [-x[3] - x[4], -x[5]])) for x in pts)

    red = reduction_b(sc, ctx).value.system
    B = red.chart
    theta = KForm.one_form(B, {"qt2": "-2*pt2", "qt3": "-pt3"})
    h = KForm.scalar(B, "(2*pt2^2 + pt3^2)/2 - 1/(2*abs(qt2))")
    liouville = VectorField.from_mapping(B, {"pt2": "pt2", "pt3": "pt3"})
    ham = VectorField.from_mapping(B, {"qt2": "pt2", "qt3": "pt3", "pt2": "-sgn(qt2)/(4*qt2^2)"})
    base = ctx.points(B)
    assert len(base) == 100
    res = {
        "theta": worst((red.theta.at(b) - theta.at(b)).max_abs() for b in base),
        "h": worst(abs(red.energy(b) - h.at(b).coeffs[0]) for b in base),
        "liouville": worst(np.max(np.abs(red.liouville(b) - liouville(b))) for b in base),
        "X_h": worst(np.max(np.abs(red.hamiltonian_field(b) - ham(b))) for b in base),
    }
    ok = j_res < 1e-12 and max(res.values()) <= 1e-9
    verdict(1, ok, f"momentum {j_res:.1e}; " + ", ".join(f"{k} {v:.1e}" for k, v in res.items()))


ETA = {
    "qt1": "-sqrt(1 + 1/abs(beta))*sqrt(2)*cos(phi)",
    "beta": "-sqrt(1 + 1/abs(beta))*sqrt(2)*cos(phit)*sin(phi)",
    "t": "-sqrt(1 + 1/abs(beta))*sin(phi)*sin(phit)",
}
ETA_RED = {"beta": "-sqrt(1 + 1/abs(beta))*sqrt(2)*cos(phit)", "t": "-sqrt(1 + 1/abs(beta))*sin(phit)"}
REEB_RED = {
    "beta": "-cos(phit)/(sqrt(2)*sqrt(1 + 1/abs(beta)))",
    "t": "-sin(phit)/sqrt(1 + 1/abs(beta))",
    "phit": "-sgn(beta)/(2*sqrt(2)*beta^2*(1 + 1/abs(beta))^(3/2))*sin(phit)",
}


def test_criterion_2_example1_energy_hypersurface(verdict):
    sc = load_scenario("example1")
    ctx = Context(sc, SEED)
    S = sc.charts["S"]
    eta = PullbackForm(sc.pipeline_a.level.embedding, sc.system.theta)
    printed = KForm.one_form(S, ETA)
    cs = ContactStructure(S, eta)
    pts = ctx.points(S)
    res = worst((eta.at(x) - printed.at(x)).max_abs() for x in pts)
    vol = min(abs(cs.volume(x)) for x in pts)
    verdict(2, len(pts) == 100 and res <= 1e-9 and vol > 1e-10,
            f"eta residual {res:.1e}; min |eta ^ (d eta)^2| {vol:.3e}")


def test_criterion_3_example1_contact_reduction(verdict):
    sc = load_scenario("example1")
    ctx = Context(sc, SEED)
    red = reduction_a(sc, ctx).structure
    M = red.chart
    eta, reeb = KForm.one_form(M, ETA_RED), VectorField.from_mapping(M, REEB_RED)
    pts = ctx.points(M)
    e_res = worst((red.eta.at(b) - eta.at(b)).max_abs() for b in pts)
    r_res = worst(np.max(np.abs(reeb_field_at(red, b) - reeb(b))) for b in pts)
    verdict(3, len(pts) == 100 and e_res <= 1e-8 and r_res <= 1e-8,
            f"eta_red {e_res:.1e}; reeb_red {r_res:.1e}")


def test_criterion_4_equivalence(verdict):
    sc = load_scenario("example1")
    ctx = Context(sc, SEED)
    red_a = reduction_a(sc, ctx).structure
    red_b = reduction_b(sc, ctx).value.system
    cs_b = energy_hypersurface(red_b, sc.pipeline_b.level, []).value
    pts = ctx.points(cs_b.chart)
    entries = {e.check_id: e for e in equivalence_check(red_a, cs_b, sc.kappa, pts)}
    form, reeb, det = (entries["E.kappa.contact_form"], entries["E.kappa.reeb"],
                       entries["E.kappa.jacobian"])
    ok = (len(pts) == 100 and form.residual < 1e-9 and reeb.residual < 1e-8 and det.passed)
    verdict(4, ok, f"kappa^* eta {form.residual:.1e}; Reeb {reeb.residual:.1e}; "
                   f"min |det| {det.residual:.3e}")


def test_criterion_5_k_mu(verdict):
    exact = compute_k_mu(np.zeros((2, 2, 2)), [0.0, 1.0])
    abelian_ok = exact.shape == (1, 2) and np.array_equal(np.abs(exact), [[1.0, 0.0]])
    dists, closures = [], []
    for seed in range(5):
        c, mu = random_algebra(seed)
        k = compute_k_mu(c, mu)
        oracle = sphere_scan_k_mu(c, mu)
        dists.append(subspace_distance(k, oracle) if k.shape == oracle.shape else math.inf)
        closures.append(closure_residual(c, k))
    ok = abelian_ok and max(dists) < 1e-8 and max(closures) <= 1e-10
    verdict(5, ok, f"abelian exact: {abelian_ok}; sphere-scan distance {max(dists):.1e}; "
                   f"closure {max(closures):.1e}")


def test_criterion_6_pullback_identities(verdict):
    sc = load_scenario("example2")
    ctx = Context(sc, SEED)
    entries = {e.check_id: e for e in reduction_b(sc, ctx).entries}
    npts = len(ctx.points(sc.pipeline_b.quotient.total.chart))
    theta, h = entries["B.reduce.pullback_theta"], entries["B.reduce.pullback_h"]
    fiber = entries["B.reduce.liouville_fiber_constant"]
    ok = (npts == 100 and sc.fiber_count == 10 and sc.fiber_size == 5
          and theta.residual < 1e-9 and h.residual < 1e-9 and fiber.residual <= 1e-8)
    verdict(6, ok, f"tau^* theta_red {theta.residual:.1e}; tau^* h_red {h.residual:.1e}; "
                   f"Liouville fiber spread {fiber.residual:.1e}")


def _commutation(name, starts, steps):
    sc = load_scenario(name)
    ctx = Context(sc, SEED)
    q = sc.pipeline_b.quotient
    basis = compute_k_mu(sc.symmetry, sc.mu)
    red = symplectic_reduce(sc.system, sc.symmetry, q, basis, [], [], []).value
    box = dict(sc.pipeline_b.flow.starts)
    pts = ctx.starts({"box": box["box"], "count": starts}, q.total.chart, "B/flow")
    return [commutation_defect(red.upstairs_hamiltonian, red.system.hamiltonian_field,
                               q.projection, pts, 0.5, h)[0] for h in steps]


def test_criterion_7_flow_commutation(verdict):
    (d2,) = _commutation("example2", 10, [1e-3])
    coarse, fine = _commutation("helix", 10, [1e-3, 5e-4])
    ratio = coarse / fine if fine > 0 else math.inf
    ok = d2 < 1e-6 and coarse < 1e-6 and ratio >= 8
    verdict(7, ok, f"example2 defect {d2:.1e}; helix defect {coarse:.2e} -> {fine:.2e} "
                   f"on halving (ratio {ratio:.1f})")


def test_criterion_8_reparametrization(verdict):
    sc = load_scenario("example1")
    ctx = Context(sc, SEED)
    S = sc.charts["S"]
    emb = sc.pipeline_a.level.embedding
    cs = ContactStructure(S, PullbackForm(emb, sc.system.theta))
    pts = ctx.points(S, 20)
    pairs = [proportionality(sc.system.hamiltonian_field, emb, cs, x) for x in pts]
    angle = max(a for a, _ in pairs)
    factor = min(abs(f) for _, f in pairs)
    verdict(8, len(pts) == 20 and angle < 1e-8 and factor > 0,
            f"max angle {angle:.1e} rad; min |factor| {factor:.3e}")


PROPERTY_SUITES = [
    "test_geometry.py::test_d_squared_vanishes",
    "test_geometry.py::test_pullback_naturality",
    "test_expr.py::test_gradient_matches_central_differences",
    "test_contact.py::test_conformal_rescaling_keeps_contact_and_reeb_normalised",
    "test_symplectic.py::test_energy_and_momentum_conserved_on_example2",
]


def test_criterion_9_property_suites(verdict):
    proc = subprocess.run(
        [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider", f"--hypothesis-seed={SEED}",
         *PROPERTY_SUITES], cwd=TESTS, capture_output=True, text=True)
    summary = proc.stdout.strip().splitlines()[-1] if proc.stdout.strip() else proc.stderr
    verdict(9, proc.returncode == 0, f"{len(PROPERTY_SUITES)} suites x 100 cases: {summary}")


def test_criterion_10_determinism(verdict, tmp_path):
    env = dict(os.environ)
    env.pop("MMW_SEED", None)
    outs = []
    for i in range(2):
        out = tmp_path / f"run{i}.json"
        proc = subprocess.run([sys.executable, "-m", "exactred", "reduce", "example1",
                               "--pipeline", "both", "--report", "json", "--seed", str(SEED),
                               "--out", str(out)], env=env, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        outs.append(out.read_bytes())
    verdict(10, outs[0] == outs[1], f"two runs, {len(outs[0])} bytes each, identical: "
                                    f"{outs[0] == outs[1]}")
