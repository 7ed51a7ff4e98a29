import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import least_squares

from exactred.geometry import Chart, KForm, PullbackForm, VectorField
from exactred.liegroup import (
    LieSymmetry, bracket_compatibility_check, closure_residual, compute_k_mu,
    infinitesimal_equivariance_check, invariance_check, momentum_at, orbit_membership, regular_value_check, subspace_distance,
)
from exactred.scenario import load_scenario

from helpers import points

P6 = Chart("P", ("q1", "q2", "q3", "p1", "p2", "p3"))
CANONICAL = KForm.one_form(P6, {"q1": "-p1", "q2": "-p2", "q3": "-p3"})
S_POINT = [0.0, 1.0, 0.0, math.pi / 2, math.pi / 2]


def levi_civita():
    c = np.zeros((3, 3, 3))
    for i, j, k in [(0, 1, 2), (1, 2, 0), (2, 0, 1)]:
        c[i, j, k], c[j, i, k] = 1.0, -1.0
    return c


SO3 = levi_civita()
# [h, e] = 2e, [h, f] = -2f, [e, f] = h in the basis (h, e, f)
SL2 = np.zeros((3, 3, 3))
SL2[0, 1, 1], SL2[1, 0, 1] = 2.0, -2.0
SL2[0, 2, 2], SL2[2, 0, 2] = -2.0, 2.0
SL2[1, 2, 0], SL2[2, 1, 0] = 1.0, -1.0
# [e1, e2] = e3
HEISENBERG = np.zeros((3, 3, 3))
HEISENBERG[0, 1, 2], HEISENBERG[1, 0, 2] = 1.0, -1.0
# [e1, e2] = e2
AFF1 = np.zeros((2, 2, 2))
AFF1[0, 1, 1], AFF1[1, 0, 1] = 1.0, -1.0


def direct_sum(a, b):
    n, m = a.shape[0], b.shape[0]
    c = np.zeros((n + m,) * 3)
    c[:n, :n, :n] = a
    c[n:, n:, n:] = b
    return c


def change_basis(c, A):
    """Structure constants in the basis e'_i = sum_j A[i, j] e_j."""
    return np.einsum("ia,jb,abk,kl->ijl", A, A, c, np.linalg.inv(A))


def sphere_scan_k_mu(c, mu, samples=4000, seed=0):
    """k_mu by brute force: scan the unit sphere of g for zeros of the defining conditions.

    A direction xi lies in k_mu when <mu, xi> = 0 and ad*_xi mu is parallel to mu, i.e.
    the wedge ad*_xi mu ^ mu vanishes.  Each sphere sample is polished with a least-squares
    solve on the sphere; the span of the polished zeros is returned.
    """
    d = mu.size

    def conditions(xi):
        # <ad*_xi mu, zeta> = -<mu, [xi, zeta]>, written out from the structure constants
        a = -np.einsum("i,ijk,k->j", xi, c, mu)
        wedge = np.outer(a, mu) - np.outer(mu, a)
        return np.r_[wedge[np.triu_indices(d, 1)], mu @ xi, xi @ xi - 1.0]

    rng = np.random.default_rng(seed)
    start = rng.normal(size=(samples, d))
    start /= np.linalg.norm(start, axis=1, keepdims=True)
    scores = np.array([np.linalg.norm(conditions(x)[:-1]) for x in start])
    zeros = []
    for x in start[np.argsort(scores)[:40]]:
        sol = least_squares(conditions, x, xtol=1e-15, ftol=1e-15, gtol=1e-15)
        if np.linalg.norm(sol.fun) < 1e-12:
            zeros.append(sol.x / np.linalg.norm(sol.x))
    if not zeros:
        return np.zeros((0, d))
    _, s, vh = np.linalg.svd(np.array(zeros))
    return vh[: int(np.sum(s > 1e-6 * s[0]))]


def random_algebra(seed):
    rng = np.random.default_rng(seed)
    base = [direct_sum(SO3, np.zeros((1, 1, 1))), direct_sum(SL2, np.zeros((1, 1, 1))),
            direct_sum(AFF1, AFF1), direct_sum(HEISENBERG, np.zeros((1, 1, 1))),
            direct_sum(AFF1, np.zeros((2, 2, 2)))][seed % 5]
    d = base.shape[0]
    A = rng.normal(size=(d, d)) + 2 * np.eye(d)
    return change_basis(base, A), rng.normal(size=d)


# --------------------------------------------------------------- momentum

def test_example2_momentum_value():
    sc = load_scenario("example2")
    np.testing.assert_array_equal(momentum_at(sc.symmetry, sc.system.theta, [1, 0, 0, 1, 2, 3]),
                                  [-3.0, -3.0])


def test_zero_theta_has_zero_momentum():
    sc = load_scenario("example2")
    J = momentum_at(sc.symmetry, KForm(P6, 1, {}), [1, 0, 0, 1, 2, 3])
    assert not np.any(J)


def test_example1_contact_momentum():
    sc = load_scenario("example1")
    S = sc.charts["S"]
    eta = PullbackForm(sc.pipeline_a.level.embedding, sc.system.theta)
    sym = LieSymmetry(None, [VectorField.from_mapping(S, {"qt1": "1"}),
                             VectorField.from_mapping(S, {"t": "1"})])
    np.testing.assert_allclose(momentum_at(sym, eta, S_POINT), [0.0, -math.sqrt(2)], atol=1e-14)


def test_orbit_membership():
    assert orbit_membership([0.0, -2.0], [0.0, 1.0])[0]
    assert orbit_membership([0.0, 3.0], [0.0, 1.0])[0]
    assert not orbit_membership([0.0, 0.0], [0.0, 1.0])[0]
    assert not orbit_membership([1.0, 1.0], [0.0, 1.0])[0]


# -------------------------------------------------------------- invariance

def test_translations_preserve_canonical_theta():
    sc = load_scenario("example2")
    pts = [np.random.default_rng(i).uniform(-1, 1, 6) for i in range(10)]
    assert invariance_check(sc.symmetry, sc.system.theta, pts).passed


def test_dilation_does_not_preserve_theta():
    sym = LieSymmetry(None, [VectorField.from_mapping(P6, {"q1": "q1"})])
    assert not invariance_check(sym, CANONICAL, [[1, 0, 0, 1, 2, 3]]).passed


def test_zero_field_preserves_everything():
    sym = LieSymmetry(None, [VectorField.from_mapping(P6, {})])
    assert invariance_check(sym, CANONICAL, [[1, 0, 0, 1, 2, 3]]).passed


def test_regular_value_on_example2():
    sc = load_scenario("example2")
    pts = [[1, 0, 0, 1, 2, 3], [0.5, -0.5, 1, 0, 1, -1]]
    assert regular_value_check(sc.symmetry, sc.system.theta, sc.mu, pts).passed
    flat = KForm(P6, 1, {})
    assert not regular_value_check(sc.symmetry, flat, sc.mu, pts).passed


def test_structure_constants_validated():
    fields = [VectorField.from_mapping(P6, {"q1": "1"})] * 3
    with pytest.raises(ValueError, match="Jacobi"):
        bad = np.zeros((3, 3, 3))
        bad[0, 1, 1], bad[1, 0, 1] = 1.0, -1.0
        bad[1, 2, 0], bad[2, 1, 0] = 1.0, -1.0
        LieSymmetry(bad, fields)
    with pytest.raises(ValueError, match="antisymmetric"):
        bad = np.zeros((3, 3, 3))
        bad[0, 1, 2] = 1.0
        LieSymmetry(bad, fields)


# ------------------------------------------------------------------- k_mu

def test_abelian_k_mu_is_kernel_of_mu():
    k = compute_k_mu(np.zeros((2, 2, 2)), [0.0, 1.0])
    assert subspace_distance(k, [[1.0, 0.0]]) <= 1e-12
    mu = np.array([1.0, 2.0, -1.0])
    k = compute_k_mu(np.zeros((3, 3, 3)), mu)
    assert k.shape == (2, 3)
    np.testing.assert_allclose(k @ mu, 0.0, atol=1e-14)


def test_zero_mu_rejected():
    with pytest.raises(ValueError):
        compute_k_mu(np.zeros((2, 2, 2)), [0.0, 0.0])


def test_so3_k_mu_is_trivial():
    # the stabilizer of mu is the line through mu, which mu does not annihilate
    assert compute_k_mu(SO3, [0.3, -1.0, 2.0]).shape == (0, 3)


def test_sl2_matches_sphere_scan():
    # mu dual to e or f gives a two-dimensional k_mu, the others a trivial one
    for mu in ([0.0, 1.0, 0.0], [0.0, 0.0, -2.0], [1.0, 0.0, 0.0], [0.3, -0.2, 1.1]):
        mu = np.array(mu)
        k = compute_k_mu(SL2, mu)
        oracle = sphere_scan_k_mu(SL2, mu)
        assert k.shape == oracle.shape
        assert subspace_distance(k, oracle) <= 1e-8


@pytest.mark.parametrize("seed", range(5))
def test_random_nonabelian_algebras_match_sphere_scan(seed):
    c, mu = random_algebra(seed)
    assert np.any(c)
    k = compute_k_mu(c, mu)
    oracle = sphere_scan_k_mu(c, mu)
    assert oracle.shape[0] >= 1
    assert k.shape == oracle.shape
    assert subspace_distance(k, oracle) <= 1e-8
    assert closure_residual(c, k) <= 1e-10


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 4), st.floats(0.1, 10).flatmap(
    lambda s: st.sampled_from([s, -s])))
def test_k_mu_invariant_under_rescaling_mu(seed, scale):
    c, mu = random_algebra(seed)
    assert subspace_distance(compute_k_mu(c, mu), compute_k_mu(c, scale * mu)) <= 1e-9


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 1000))
def test_k_mu_annihilated_by_mu(seed):
    c, mu = random_algebra(seed)
    k = compute_k_mu(c, mu)
    if k.size:
        np.testing.assert_allclose(k @ mu, 0.0, atol=1e-10 * np.linalg.norm(mu))


@settings(max_examples=100, deadline=None)
@given(points(6), st.floats(-3, 3), st.floats(-3, 3))
def test_momentum_linear_in_theta(x, a, b):
    sc = load_scenario("example2")
    other = KForm.one_form(P6, {"q1": "q2*p3", "q3": "sin(p1)", "p2": "q1"})
    combo = KForm.one_form(P6, {"q1": f"({a!r})*(-p1) + ({b!r})*q2*p3", "q2": f"({a!r})*(-p2)",
                                "q3": f"({a!r})*(-p3) + ({b!r})*sin(p1)", "p2": f"({b!r})*q1"})
    lhs = momentum_at(sc.symmetry, combo, x)
    rhs = a * momentum_at(sc.symmetry, sc.system.theta, x) + b * momentum_at(sc.symmetry, other, x)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * (1 + np.abs(rhs).max()))


# ------------------------------------------------------------ equivariance

def rotations():
    """Cotangent lift of the rotation action of SO(3) on R^3."""
    q, p = ("q1", "q2", "q3"), ("p1", "p2", "p3")
    fields = []
    for i in range(3):
        comp = {}
        for j in range(3):
            for k in range(3):
                s = float(SO3[i, j, k])
                if s:
                    # (e_i x v)_k = eps_ijk v_j
                    comp[q[k]] = f"{comp[q[k]]} + {s!r}*{q[j]}" if q[k] in comp else f"{s!r}*{q[j]}"
                    comp[p[k]] = f"{comp[p[k]]} + {s!r}*{p[j]}" if p[k] in comp else f"{s!r}*{p[j]}"
        fields.append(VectorField.from_mapping(P6, comp))
    return LieSymmetry(SO3, fields)


def test_example2_momentum_is_equivariant():
    sc = load_scenario("example2")
    assert infinitesimal_equivariance_check(sc.symmetry, sc.system.theta,
                                            [[1, 0, 0, 1, 2, 3]]).passed


def test_nonequivariant_momentum_detected():
    # replacing a translation by d/dp1 keeps the algebra abelian but breaks equivariance
    sym = LieSymmetry(None, [VectorField.from_mapping(P6, {"p1": "1"}),
                             VectorField.from_mapping(P6, {"q1": "1"})])
    assert not infinitesimal_equivariance_check(sym, CANONICAL, [[1, 0, 0, 1, 2, 3]]).passed


@settings(max_examples=100, deadline=None)
@given(points(6))
def test_rotation_momentum_is_equivariant(x):
    sym = rotations()
    assert infinitesimal_equivariance_check(sym, CANONICAL, [x], tol=1e-10).passed


def test_rotation_fields_are_anti_homomorphism():
    assert bracket_compatibility_check(rotations(), [[1.0, 0.5, -0.3, 0.2, -1.0, 0.7]]).passed


def test_rotation_momentum_is_angular_momentum():
    x = np.array([1.0, 0.5, -0.3, 0.2, -1.0, 0.7])
    J = momentum_at(rotations(), CANONICAL, x)
    # <J, e_i> = -p . (e_i x q) = -(q x p)_i
    np.testing.assert_allclose(J, -np.cross(x[:3], x[3:]), atol=1e-14)
