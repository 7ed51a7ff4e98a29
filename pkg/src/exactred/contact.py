"""Co-orientable contact structures given by a 1-form, and their Reeb fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import report as rp
from .geometry import Chart, FormField, SolvedField, top_wedge_volume
from .liegroup import numeric_rank

CONTACT_TOL = 1e-10
REEB_RESIDUAL_TOL = 1e-9


class ReebError(ArithmeticError):
    """The Reeb system is rank deficient or inconsistent at the point."""


@dataclass(frozen=True)
class ContactStructure:
    chart: Chart
    eta: FormField

    def __post_init__(self):
        if self.chart.dim % 2 == 0:
            raise ValueError(f"contact chart {self.chart.name!r} must have odd dimension")
        if self.eta.degree != 1:
            raise ValueError("contact form must be a 1-form")

    def volume(self, x) -> float:
        """eta ^ (d eta)^(n-1) on the coordinate basis."""
        return top_wedge_volume(self.eta.at(x), self.eta.d_at(x))

    @property
    def reeb(self) -> SolvedField:
        return SolvedField(self.chart, lambda x: reeb_field_at(self, x), "reeb")


def reeb_system(cs: ContactStructure, x):
    eta = cs.eta.at(x).coeffs
    n = cs.chart.dim
    deta = cs.eta.d_at(x)
    m = deta.matrix() if n >= 2 else np.zeros((n, n))
    a = np.vstack([eta, m])
    b = np.zeros(n + 1)
    b[0] = 1.0
    return a, b


def reeb_field_at(cs: ContactStructure, x, residual_tol: float = REEB_RESIDUAL_TOL) -> np.ndarray:
    """Least-squares solve of i_R eta = 1, i_R d eta = 0 with rank and residual gates."""
    a, b = reeb_system(cs, x)
    n = cs.chart.dim
    if numeric_rank(a) < n:
        raise ReebError(f"Reeb system rank deficient at {cs.chart.as_dict(x)}")
    r, *_ = np.linalg.lstsq(a, b, rcond=None)
    res = float(np.max(np.abs(a @ r - b)))
    if res > residual_tol:
        raise ReebError(f"Reeb residual {res:.3e} at {cs.chart.as_dict(x)}")
    return r


def reeb_residuals(cs: ContactStructure, r, x) -> float:
    """max(|i_R eta - 1|, max |i_R d eta|) for a candidate vector r."""
    a, b = reeb_system(cs, x)
    return float(np.max(np.abs(a @ np.asarray(r) - b)))


def contact_condition_check(cs: ContactStructure, points, tol: float = CONTACT_TOL,
                            check_id: str = "contact.condition") -> rp.Entry:
    return rp.measure(check_id, "eta ^ (d eta)^(n-1) is a volume form (nonzero)", points,
                      lambda x: abs(cs.volume(x)), tol, chart=cs.chart, comparator=">")


def reeb_check(cs: ContactStructure, points, tol: float = REEB_RESIDUAL_TOL,
               check_id: str = "contact.reeb") -> rp.Entry:
    return rp.measure(check_id, "Reeb field satisfies i_R eta = 1 and i_R d eta = 0", points,
                      lambda x: reeb_residuals(cs, reeb_field_at(cs, x), x), tol, chart=cs.chart)
