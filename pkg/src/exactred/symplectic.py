"""Exact symplectic systems: the symplectic matrix, Liouville and Hamiltonian fields.

Sign convention.  With theta = -sum p_i dq_i the canonical structure must give
Liouville field sum p_i d/dp_i and Hamiltonian field X_h with q' = dh/dp.  Both hold
when the symplectic matrix is ``Omega[i, j] = (d theta)(e_i, e_j)`` and interior
products act on the first slot, i.e. the fields solve ``-Omega v = rhs``.
Equivalently omega = -d theta with contraction in the second slot; the linear
systems are identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .geometry import Chart, FormField, FormValue, SolvedField, d_from_jets


class DegeneracyError(ArithmeticError):
    """The symplectic matrix is singular at the evaluation point."""


class ResidualError(ArithmeticError):
    pass


NONDEGENERACY_TOL = 1e-12
SOLVE_RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class ExactSymplecticSystem:
    chart: Chart
    theta: FormField
    hamiltonian: FormField
    nondegeneracy_tol: float = NONDEGENERACY_TOL
    residual_tol: float = SOLVE_RESIDUAL_TOL
    name: str = field(default="", compare=False)

    def __post_init__(self):
        if self.chart.dim % 2:
            raise ValueError(f"symplectic chart {self.chart.name!r} has odd dimension")
        if self.theta.degree != 1 or self.hamiltonian.degree != 0:
            raise ValueError("theta must be a 1-form and the Hamiltonian a 0-form")
        for f in (self.theta, self.hamiltonian):
            if f.chart.dim != self.chart.dim:
                raise ValueError("theta and the Hamiltonian must live on the system chart")

    @property
    def liouville(self) -> SolvedField:
        return SolvedField(self.chart, lambda x: liouville_field_at(self, x), "liouville")

    @property
    def hamiltonian_field(self) -> SolvedField:
        return SolvedField(self.chart, lambda x: hamiltonian_field_at(self, x), "hamiltonian")

    def energy(self, x) -> float:
        return float(self.hamiltonian.at(x).coeffs[0])


def omega_at(sys: ExactSymplecticSystem, x) -> np.ndarray:
    """Antisymmetric matrix omega(e_i, e_j)."""
    return sys.theta.d_at(x).matrix()


def is_nondegenerate(m: np.ndarray, tol: float = NONDEGENERACY_TOL) -> bool:
    norm = np.max(np.sum(np.abs(m), axis=1)) if m.size else 0.0
    return bool(norm > 0 and abs(np.linalg.det(m)) > tol * norm ** m.shape[0])


def _solve(sys: ExactSymplecticSystem, x, rhs: np.ndarray) -> np.ndarray:
    m = omega_at(sys, x)
    if not is_nondegenerate(m, sys.nondegeneracy_tol):
        raise DegeneracyError(f"symplectic matrix is degenerate at {sys.chart.as_dict(x)}")
    a = -m
    v = np.linalg.solve(a, rhs)
    res = float(np.max(np.abs(a @ v - rhs)))
    if res > sys.residual_tol * max(1.0, float(np.max(np.abs(rhs)))):
        raise ResidualError(f"solve residual {res:.3e} at {sys.chart.as_dict(x)}")
    return v


def liouville_field_at(sys: ExactSymplecticSystem, x) -> np.ndarray:
    """Solve i_v omega = theta."""
    return _solve(sys, x, sys.theta.at(x).coeffs)


def hamiltonian_field_at(sys: ExactSymplecticSystem, x) -> np.ndarray:
    """Solve i_v omega = dh."""
    return _solve(sys, x, sys.hamiltonian.d_at(x).coeffs)


def hamiltonian_field_of(sys: ExactSymplecticSystem, f: FormField, x) -> np.ndarray:
    return _solve(sys, x, f.d_at(x).coeffs)


def omega_form(sys: ExactSymplecticSystem, x) -> FormValue:
    return sys.theta.d_at(x)


def closedness_residual(sys: ExactSymplecticSystem, x, step: float = 1e-5) -> float:
    """max |d omega| with d omega built from central differences of the AD-exact omega."""
    x = np.asarray(x, dtype=float)
    n = sys.chart.dim
    base = sys.theta.d_at(x)
    grads = np.zeros((base.coeffs.size, n))
    for m in range(n):
        h = step * max(1.0, abs(x[m]))
        e = np.zeros(n)
        e[m] = h
        grads[:, m] = (sys.theta.d_at(x + e).coeffs - sys.theta.d_at(x - e).coeffs) / (2 * h)
    if n < 3:
        return 0.0
    return d_from_jets(n, 2, grads).max_abs()


def liouville_residual(sys: ExactSymplecticSystem, x) -> float:
    """max |i_nabla omega - theta| over coefficients."""
    v = liouville_field_at(sys, x)
    return float(np.max(np.abs(-omega_at(sys, x) @ v - sys.theta.at(x).coeffs)))
