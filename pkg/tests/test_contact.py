import math

import numpy as np
import pytest
from hypothesis import given, settings

from exactred.contact import (
    ContactStructure, ReebError, contact_condition_check, reeb_check, reeb_field_at,
)
from exactred.geometry import Chart, KForm, PullbackForm, VectorField
from exactred.scenario import load_scenario

from helpers import d_dense, points, polynomial

R3 = Chart("R3", ("x", "y", "z"))
STANDARD = KForm.one_form(R3, {"z": "1", "x": "-y"})
S_POINT = [0.0, 1.0, 0.0, math.pi / 2, math.pi / 2]


def test_standard_form_on_r3():
    cs = ContactStructure(R3, STANDARD)
    x = [0.3, -1.2, 2.0]
    # eta ^ d eta = dz ^ dx ^ dy = dx ^ dy ^ dz
    assert cs.volume(x) == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(reeb_field_at(cs, x), [0.0, 0.0, 1.0], atol=1e-14)


def test_closed_form_is_not_contact():
    cs = ContactStructure(R3, KForm.one_form(R3, {"z": "1"}))
    assert cs.volume([0, 0, 0]) == 0.0
    assert not contact_condition_check(cs, [[0, 0, 0]]).passed
    with pytest.raises(ReebError):
        reeb_field_at(cs, [0.0, 0.0, 0.0])
    assert not reeb_check(cs, [[0, 0, 0]]).passed


def test_even_dimension_rejected():
    qp = Chart("QP", ("q", "p"))
    with pytest.raises(ValueError, match="odd dimension"):
        ContactStructure(qp, KForm.one_form(qp, {"q": "-p"}))


def test_level_set_of_free_particle():
    # h = p^2/2 on T*R restricted to p = 1: eta = -dq, Reeb field -d/dq
    line = Chart("L", ("q",))
    cs = ContactStructure(line, KForm.one_form(line, {"q": "-1"}))
    np.testing.assert_array_equal(reeb_field_at(cs, [0.4]), [-1.0])


def test_example1_reeb_field_matches_closed_form():
    sc = load_scenario("example1")
    S = sc.charts["S"]
    expected = next(o for o in sc.pipeline_a.oracles if o.object == "reeb").expected
    oracle = VectorField.from_mapping(S, expected)
    cs = ContactStructure(S, PullbackForm(sc.pipeline_a.level.embedding, sc.system.theta))
    rng = np.random.default_rng(3)
    for _ in range(10):
        x = np.array([rng.uniform(-1, 1), rng.uniform(0.5, 2), rng.uniform(-1, 1),
                      rng.uniform(0.3, 2.8), rng.uniform(-3, 3)])
        np.testing.assert_allclose(reeb_field_at(cs, x), oracle(x), atol=1e-8)
    assert abs(cs.volume(S_POINT)) > 1e-3


# ---------------------------------------------------------------- properties

@settings(max_examples=100, deadline=None)
@given(polynomial(R3.coords), points(3, -1, 1))
def test_conformal_rescaling_keeps_contact_and_reeb_normalised(f, x):
    # exp(f) (dz - y dx) is contact for any f; its Reeb field is checked against the
    # wedge-definition d, independent of the engine's d table
    g = f"exp(({f})/8)"
    eta = KForm.one_form(R3, {"z": g, "x": f"-y*{g}"})
    cs = ContactStructure(R3, eta)
    assert abs(cs.volume(x)) > 1e-10
    r = reeb_field_at(cs, x)
    assert eta.at(x).coeffs @ r == pytest.approx(1.0, abs=1e-9)
    deta = d_dense(eta, x)
    np.testing.assert_allclose(np.einsum("i,ij->j", r, deta), 0.0, atol=1e-9)
