import json

import numpy as np
import pytest

from exactred.contact import ContactStructure
from exactred.geometry import KForm, PullbackForm
from exactred.liegroup import compute_k_mu, subspace_distance
from exactred.pipeline import run_pipeline
from exactred.reduction import (
    Tolerances, contact_reduce, equivalence_check, induced_contact_symmetry, symplectic_reduce,
)
from exactred.scenario import builtin_text, load_scenario, scenario_from_dict

BASE_POINTS = [np.array([1.3, 0.2, 0.4, 0.9]), np.array([-1.7, -0.5, -0.3, 1.2])]


def quick(name="example2"):
    """The built-in scenario with small sample sets so a full run takes a second or two."""
    d = json.loads(builtin_text(name))
    d["sampling"] = {"count": 6, "fibers": 2, "fiber_points": 3}
    for key in ("pipeline_a", "pipeline_b"):
        flow = d.get(key, {}).get("flow")
        if flow:
            flow.pop("starts", None)
            flow.pop("orbit_starts", None)
            flow["reparametrization_points"] = 3
    return d


def run(d, which="B"):
    return run_pipeline(scenario_from_dict(d), which)


def status(report, check_id):
    return report.get(check_id).status


@pytest.fixture(scope="module")
def baseline():
    return run(quick())


def test_quick_baseline_passes(baseline):
    assert baseline.overall == "pass", [e.check_id for e in baseline.failures()]


def test_wrong_section_detected():
    d = quick()
    d["pipeline_b"]["quotient"]["section"]["qt2"] = "qt2 + 0.1"
    assert status(run(d), "B.quotient.section") == "fail"


def test_projection_not_constant_on_fibers_detected():
    d = quick()
    d["pipeline_b"]["quotient"]["projection"]["qt2"] = "qt2 + qt1"
    assert status(run(d), "B.quotient.fiber_tangency") == "fail"


def test_preimage_off_the_momentum_ray_detected():
    d = quick()
    d["pipeline_b"]["preimage"]["embedding"]["p2"] = "-pt2 + 0.2"
    assert status(run(d), "B.preimage.membership") == "fail"


def test_broken_symmetry_detected():
    d = quick()
    d["system"]["hamiltonian"] += " + q3"
    r = run(d)
    assert status(r, "P.symmetry.hamiltonian") == "fail"
    assert r.exit_code == 1


def test_wrong_oracles_detected():
    d = quick()
    for o in d["pipeline_b"]["oracles"]:
        if o["object"] == "h_red":
            o["expected"] = "(pt2^2 + pt3^2)/2 - 1/(2*abs(qt2))"
        if o["object"] == "k_mu":
            o["expected"] = [[0, 1]]
    r = run(d)
    assert status(r, "B.oracle.h_red") == "fail"
    assert status(r, "B.oracle.k_mu") == "fail"


def test_rescaled_mu_gives_the_same_reduction(baseline):
    d = quick()
    d["mu"] = [0, -2]
    r = run(d)
    assert r.overall == "pass"
    assert [e.check_id for e in r.entries] == [e.check_id for e in baseline.entries]


def test_symplectic_reduction_of_example2_matches_closed_forms():
    sc = load_scenario("example2")
    q = sc.pipeline_b.quotient
    basis = compute_k_mu(sc.symmetry, sc.mu)
    stage = symplectic_reduce(sc.system, sc.symmetry, q, basis, [], BASE_POINTS, [])
    red = stage.value.system
    theta = KForm.one_form(q.base, {"qt2": "-2*pt2", "qt3": "-pt3"})
    h = KForm.scalar(q.base, "(2*pt2^2 + pt3^2)/2 - 1/(2*abs(qt2))")
    for b in BASE_POINTS:
        np.testing.assert_allclose(red.theta.at(b).coeffs, theta.at(b).coeffs, atol=1e-14)
        assert red.energy(b) == pytest.approx(h.at(b).coeffs[0], abs=1e-14)
    assert stage.ok


def test_contact_reduction_of_example1_matches_closed_form():
    sc = load_scenario("example1")
    data = sc.pipeline_a
    cs = ContactStructure(data.level.chart, PullbackForm(data.level.embedding, sc.system.theta))
    sym_s = induced_contact_symmetry(sc.symmetry, data.level, sc.system.theta,
                                     sc.system.hamiltonian, []).value
    basis = compute_k_mu(sym_s, sc.mu)
    assert subspace_distance(basis, [[1.0, 0.0]]) == 0.0
    pts = [np.array([1.2, 0.3, 1.0]), np.array([-1.5, -0.7, 2.0])]
    stage = contact_reduce(cs, sym_s, data.quotient, basis, [], pts, [])
    expected = KForm.one_form(data.quotient.base, {
        "beta": "-sqrt(1 + 1/abs(beta))*sqrt(2)*cos(phit)", "t": "-sqrt(1 + 1/abs(beta))*sin(phit)"})
    for b in pts:
        np.testing.assert_allclose(stage.value.structure.eta.at(b).coeffs, expected.at(b).coeffs,
                                   atol=1e-14)
    assert stage.ok


def test_equivalence_with_identity_kappa():
    sc = load_scenario("example1")
    M = sc.pipeline_a.quotient.base
    eta = KForm.one_form(M, {"beta": "-sqrt(1 + 1/abs(beta))*sqrt(2)*cos(phit)",
                             "t": "-sqrt(1 + 1/abs(beta))*sin(phit)"})
    cs = ContactStructure(M, eta)
    kappa = sc.kappa.__class__(M, M, list(M.coords))
    entries = equivalence_check(cs, cs, kappa, [np.array([1.2, 0.3, 1.0])])
    by_id = {e.check_id: e for e in entries}
    assert by_id["E.kappa.jacobian"].passed
    assert by_id["E.kappa.diagram"].status == "skipped"
    assert by_id["E.kappa.contact_form"].residual == 0.0
    assert by_id["E.kappa.contact_form"].strength == "observed"


def test_tolerance_names_are_closed():
    with pytest.raises(ValueError, match="unknown tolerance"):
        Tolerances.from_mapping({"bogus": 1.0})
    assert Tolerances.from_mapping({"commutation": 1e-7}).commutation == 1e-7
