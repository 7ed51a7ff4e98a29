"""Infinitesimal Lie symmetry data: structure constants, fundamental fields, momentum maps.

Conventions: ``[e_i, e_j] = sum_k c[i, j, k] e_k``; the coadjoint action is
``<ad*_xi mu, zeta> = -<mu, [xi, zeta]>``; fundamental fields of a left action form
an anti-homomorphism, ``[xi_P^i, xi_P^j] = -sum_k c[i, j, k] xi_P^k``.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import report as rp
from .geometry import FormField, LinearCombinationField, VectorFieldBase, bracket, lie_derivative

RANK_TOL = 1e-10
ORBIT_LAMBDA_MIN = 1e-10


class ClosureError(ArithmeticError):
    pass


class LieSymmetry:
    def __init__(self, structure_constants, fundamental_fields: Sequence[VectorFieldBase],
                 jacobi_tol: float = 1e-12):
        fields = tuple(fundamental_fields)
        if not fields:
            raise ValueError("a symmetry needs at least one fundamental field")
        d = len(fields)
        c = np.zeros((d, d, d)) if structure_constants is None else np.asarray(
            structure_constants, dtype=float)
        if c.shape != (d, d, d):
            raise ValueError(f"structure constants must have shape {(d, d, d)}, got {c.shape}")
        charts = {f.chart.name for f in fields}
        if len(charts) != 1:
            raise ValueError("fundamental fields must share one chart")
        self.structure_constants = c
        self.fundamental_fields = fields
        self.chart = fields[0].chart
        anti = float(np.max(np.abs(c + c.transpose(1, 0, 2))))
        if anti > jacobi_tol:
            raise ValueError(f"structure constants are not antisymmetric (residual {anti:.2e})")
        jac = jacobi_residual(c)
        if jac > jacobi_tol:
            raise ValueError(f"structure constants violate the Jacobi identity (residual {jac:.2e})")

    @property
    def dim(self) -> int:
        return len(self.fundamental_fields)

    @property
    def is_abelian(self) -> bool:
        return not np.any(self.structure_constants)

    def bracket(self, a, b) -> np.ndarray:
        return np.einsum("i,j,ijk->k", a, b, self.structure_constants)

    def field(self, xi) -> LinearCombinationField:
        return LinearCombinationField(self.fundamental_fields, xi)

    def with_fields(self, fields: Sequence[VectorFieldBase]) -> "LieSymmetry":
        return LieSymmetry(self.structure_constants, fields)


def jacobi_residual(c: np.ndarray) -> float:
    # sum over cyclic (i, j, k) of [[e_i, e_j], e_k]
    t = np.einsum("ijm,mkn->ijkn", c, c)
    cyc = t + t.transpose(1, 2, 0, 3) + t.transpose(2, 0, 1, 3)
    return float(np.max(np.abs(cyc))) if cyc.size else 0.0


# --------------------------------------------------------------- momentum

def momentum_at(sym: LieSymmetry, theta: FormField, x) -> np.ndarray:
    """Components <J(x), e_i> = i_{xi_i} theta."""
    t = theta.at(x).coeffs
    return np.array([t @ f(x) for f in sym.fundamental_fields])


def momentum_jacobian(sym: LieSymmetry, theta: FormField, x):
    """(J, DJ) with DJ[i, m] = d_m <J, e_i>."""
    val, G = theta.jets(x)
    t = val.coeffs
    rows, values = [], []
    for f in sym.fundamental_fields:
        v, Dv = f.jacobian(x)
        values.append(t @ v)
        rows.append(Dv.T @ t + G.T @ v)
    return np.array(values), np.array(rows)


def orbit_membership(J, mu, rank_tol: float = RANK_TOL):
    """Test J in R^x mu.  Returns (member, lam, distance ||J - lam mu||)."""
    J = np.asarray(J, dtype=float)
    mu = np.asarray(mu, dtype=float)
    lam = float(J @ mu / (mu @ mu))
    dist = float(np.max(np.abs(J - lam * mu)))
    s = np.linalg.svd(np.vstack([J, mu]), compute_uv=False)
    rank_one = s[1] <= rank_tol * s[0]
    return bool(rank_one and abs(lam) > ORBIT_LAMBDA_MIN), lam, dist


def numeric_rank(m: np.ndarray, rank_tol: float = RANK_TOL) -> int:
    s = np.linalg.svd(np.atleast_2d(m), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rank_tol * s[0]))


# ----------------------------------------------------------------- k_mu

def coadjoint_matrix(c: np.ndarray, mu) -> np.ndarray:
    """A[k, i] = <ad*_{e_i} mu, e_k> = -sum_j mu_j c[i, k, j]."""
    return -np.einsum("ikj,j->ki", c, np.asarray(mu, dtype=float))


def nullspace(m: np.ndarray, rank_tol: float = RANK_TOL) -> np.ndarray:
    """Orthonormal rows spanning ker m, sign-normalized."""
    m = np.atleast_2d(m)
    _, s, vh = np.linalg.svd(m)
    scale = s[0] if s.size and s[0] > 0 else 1.0
    rank = int(np.sum(s > rank_tol * scale))
    basis = vh[rank:]
    for row in basis:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return basis


def closure_residual(c: np.ndarray, basis: np.ndarray) -> float:
    """Largest component of [b_i, b_j] outside span(basis)."""
    if len(basis) < 2:
        return 0.0
    proj = basis.T @ basis
    worst = 0.0
    for i in range(len(basis)):
        for j in range(i + 1, len(basis)):
            w = np.einsum("i,j,ijk->k", basis[i], basis[j], c)
            worst = max(worst, float(np.max(np.abs(w - proj @ w))))
    return worst


def compute_k_mu(sym, mu, rank_tol: float = RANK_TOL, closure_tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (rows) of k_mu = ker mu  intersected with  {xi : ad*_xi mu parallel to mu}."""
    c = sym.structure_constants if isinstance(sym, LieSymmetry) else np.asarray(sym, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if not np.any(mu):
        raise ValueError("mu must be nonzero")
    d = mu.size
    perp = np.eye(d) - np.outer(mu, mu) / (mu @ mu)
    conditions = np.vstack([perp @ coadjoint_matrix(c, mu), mu[None, :]])
    basis = nullspace(conditions, rank_tol)
    res = closure_residual(c, basis)
    if res > closure_tol:
        raise ClosureError(f"k_mu is not closed under the bracket (residual {res:.2e})")
    return basis


def subspace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Spectral norm of the difference of orthogonal projectors onto row spans."""
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    d = a.shape[1] if a.size else b.shape[1]
    pa = a.T @ np.linalg.pinv(a.T) if a.size else np.zeros((d, d))
    pb = b.T @ np.linalg.pinv(b.T) if b.size else np.zeros((d, d))
    return float(np.linalg.norm(pa - pb, 2))


# ----------------------------------------------------------------- checks

def invariance_check(sym: LieSymmetry, form: FormField, points, tol: float = 1e-10,
                     check_id: str = "symmetry.invariance",
                     anchor: str = "the action preserves the one-form: L_xi theta = 0") -> rp.Entry:
    def residual(x):
        return max(lie_derivative(f, form, x).max_abs() for f in sym.fundamental_fields)
    return rp.measure(check_id, anchor, points, residual, tol, chart=form.chart)


def function_invariance_check(sym: LieSymmetry, scalar: FormField, points, tol: float = 1e-10,
                              check_id: str = "symmetry.hamiltonian",
                              anchor: str = "the Hamiltonian is invariant: xi(h) = 0") -> rp.Entry:
    def residual(x):
        dh = scalar.d_at(x).coeffs
        return max(abs(dh @ f(x)) for f in sym.fundamental_fields)
    return rp.measure(check_id, anchor, points, residual, tol, chart=scalar.chart)


def bracket_compatibility_check(sym: LieSymmetry, points, tol: float = 1e-8,
                                check_id: str = "symmetry.brackets") -> rp.Entry:
    c = sym.structure_constants
    fields = sym.fundamental_fields

    def residual(x):
        vals = np.array([f(x) for f in fields])
        worst = 0.0
        for i in range(sym.dim):
            for j in range(i + 1, sym.dim):
                expected = -(c[i, j] @ vals)
                worst = max(worst, float(np.max(np.abs(bracket(fields[i], fields[j], x) - expected))))
        return worst

    return rp.measure(check_id, "fundamental fields form an anti-homomorphism of the Lie algebra",
                      points, residual, tol, chart=sym.chart)


def regular_value_check(sym: LieSymmetry, theta: FormField, mu, points,
                        rank_tol: float = RANK_TOL,
                        check_id: str = "momentum.regular_value") -> rp.Entry:
    """Pass iff the momentum Jacobian has full rank dim g at every level point.

    The reported value is the smallest relative singular value seen.
    """
    def residual(x):
        _, DJ = momentum_jacobian(sym, theta, x)
        s = np.linalg.svd(DJ, compute_uv=False)
        if s.size < sym.dim or s[0] == 0.0:
            return 0.0
        return float(s[sym.dim - 1] / s[0])

    return rp.measure(check_id, "mu is a regular value: the momentum Jacobian is surjective",
                      points, residual, rank_tol, chart=theta.chart, comparator=">")


def infinitesimal_equivariance_check(sym: LieSymmetry, theta: FormField, points,
                                     tol: float = 1e-10,
                                     check_id: str = "momentum.equivariance") -> rp.Entry:
    """xi_P <J, zeta> + <J, [xi, zeta]> = 0 over all basis pairs."""
    c = sym.structure_constants

    def residual(x):
        J, DJ = momentum_jacobian(sym, theta, x)
        vals = [f(x) for f in sym.fundamental_fields]
        worst = 0.0
        for i in range(sym.dim):
            for j in range(sym.dim):
                r = DJ[j] @ vals[i] + c[i, j] @ J
                worst = max(worst, abs(float(r)))
        return worst

    return rp.measure(check_id, "momentum map is infinitesimally Ad*-equivariant",
                      points, residual, tol, chart=theta.chart)
