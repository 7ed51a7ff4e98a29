"""Energy hypersurfaces, exact symplectic reduction, contact reduction and their equivalence.

Quotients are never synthesized.  The caller declares a submanifold chart for the
momentum preimage and a (projection, section) pair onto a base chart; every check
below certifies that data at sample points and the reduced objects are then read
off through the section.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import report as rp
from .catalog import anchor
from .contact import ContactStructure, reeb_field_at, reeb_residuals
from .geometry import (
    Chart, FormField, LiftedVectorField, MapBase, PullbackForm, VectorFieldBase,
    compose, lie_derivative,
)
from .liegroup import (
    LieSymmetry, compute_k_mu, momentum_at, orbit_membership, regular_value_check,
    subspace_distance,
)
from .symplectic import ExactSymplecticSystem

LEVEL_SET = "level_set"
MOMENTUM_PREIMAGE = "momentum_preimage"


@dataclass(frozen=True)
class Tolerances:
    level: float = 1e-10
    rank: float = 1e-10
    tangency: float = 1e-9
    section: float = 1e-10
    fiber_tangency: float = 1e-9
    basic: float = 1e-9
    pullback: float = 1e-9
    pushforward: float = 1e-8
    fiber_constancy: float = 1e-8
    invariance: float = 1e-10
    brackets: float = 1e-8
    momentum: float = 1e-10
    transversality: float = 1e-8
    contact: float = 1e-10
    reeb: float = 1e-9
    nondegeneracy: float = 1e-12
    commutation: float = 1e-6
    angle: float = 1e-8
    factor: float = 1e-12
    hausdorff: float = 1e-5
    kappa_det: float = 1e-10
    diagram: float = 1e-10
    equivalence_form: float = 1e-9
    equivalence_reeb: float = 1e-8
    oracle: float = 1e-9

    @classmethod
    def from_mapping(cls, table) -> "Tolerances":
        unknown = set(table) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown tolerance {sorted(unknown)[0]!r}")
        return cls(**{k: float(v) for k, v in table.items()})


@dataclass(frozen=True)
class SubmanifoldChart:
    """A chart embedded in an ambient chart as a level set of h or an R^x mu momentum preimage."""

    chart: Chart
    embedding: MapBase
    role: str
    value: object

    def __post_init__(self):
        if self.role not in (LEVEL_SET, MOMENTUM_PREIMAGE):
            raise ValueError(f"unknown submanifold role {self.role!r}")
        if self.embedding.source.name != self.chart.name:
            raise ValueError(f"embedding source {self.embedding.source.name!r} is not "
                             f"chart {self.chart.name!r}")
        if self.embedding.target.dim <= self.chart.dim:
            raise ValueError(f"chart {self.chart.name!r} is not of lower dimension than "
                             f"{self.embedding.target.name!r}")

    @classmethod
    def level_set(cls, chart: Chart, embedding: MapBase, c: float) -> "SubmanifoldChart":
        return cls(chart, embedding, LEVEL_SET, float(c))

    @classmethod
    def momentum_preimage(cls, chart: Chart, embedding: MapBase, mu) -> "SubmanifoldChart":
        return cls(chart, embedding, MOMENTUM_PREIMAGE, np.asarray(mu, dtype=float))

    @property
    def ambient(self) -> Chart:
        return self.embedding.target


@dataclass(frozen=True)
class QuotientChartData:
    total: SubmanifoldChart
    base: Chart
    projection: MapBase
    section: MapBase
    ambient_projection: MapBase | None = None
    alternate_section: MapBase | None = None

    def __post_init__(self):
        tc = self.total.chart
        if self.projection.source.name != tc.name or self.projection.target.name != self.base.name:
            raise ValueError(f"projection must map {tc.name!r} to {self.base.name!r}")
        for s in (self.section, self.alternate_section):
            if s is not None and (s.source.name != self.base.name or s.target.name != tc.name):
                raise ValueError(f"section must map {self.base.name!r} to {tc.name!r}")
        ap = self.ambient_projection
        if ap is not None and ap.target.name != self.base.name:
            raise ValueError(f"ambient projection must land in {self.base.name!r}")


@dataclass
class Stage:
    """Output of one construction step together with the report entries certifying it."""

    value: object
    entries: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(e.status != rp.FAIL for e in self.entries)


def _entry(check_id, points, residual, tol, chart, comparator="<=", strength="theorem"):
    return rp.measure(check_id, anchor(check_id), points, residual, tol, chart=chart,
                      comparator=comparator, strength=strength)


def _min_rel_singular(m: np.ndarray, rank: int) -> float:
    s = np.linalg.svd(np.atleast_2d(m), compute_uv=False)
    if s.size < rank or s[0] == 0.0:
        return 0.0
    return float(s[rank - 1] / s[0])


def _max_abs(a) -> float:
    a = np.asarray(a, dtype=float)
    return float(np.max(np.abs(a))) if a.size else 0.0


# ---------------------------------------------------------- submanifolds

def immersion_check(sub: SubmanifoldChart, points, tol: Tolerances, check_id: str) -> rp.Entry:
    m = sub.chart.dim
    return _entry(check_id, points, lambda x: _min_rel_singular(sub.embedding.jacobian(x)[1], m),
                  tol.rank, sub.chart, comparator=">")


def level_set_checks(hamiltonian: FormField, sub: SubmanifoldChart, points, tol: Tolerances,
                     prefix: str) -> list:
    c = sub.value

    def value(x):
        return abs(float(hamiltonian.at(sub.embedding(x)).coeffs[0]) - c)

    return [
        _entry(f"{prefix}.level.value", points, value, tol.level, sub.chart),
        immersion_check(sub, points, tol, f"{prefix}.level.rank"),
        rp.single(f"{prefix}.level.dimension", anchor("level.dimension"),
                  abs(sub.ambient.dim - 1 - sub.chart.dim), 0.0,
                  detail=f"{sub.ambient.name}: {sub.ambient.dim}, {sub.chart.name}: {sub.chart.dim}"),
    ]


def membership_residual(J, mu) -> float:
    """Relative second singular value of [J; mu]; infinite when J is (numerically) zero."""
    member, lam, _ = orbit_membership(J, mu)
    if abs(lam) <= 1e-10:
        return float("inf")
    s = np.linalg.svd(np.vstack([J, mu]), compute_uv=False)
    return float(s[1] / s[0])


def preimage_checks(sym: LieSymmetry, form: FormField, sub: SubmanifoldChart, points,
                    tol: Tolerances, prefix: str) -> list:
    mu = sub.value

    def member(x):
        return membership_residual(momentum_at(sym, form, sub.embedding(x)), mu)

    ambient_points = [sub.embedding(x) for x in points]
    return [
        _entry(f"{prefix}.preimage.membership", points, member, tol.rank, sub.chart),
        immersion_check(sub, points, tol, f"{prefix}.preimage.rank"),
        regular_value_check(sym, form, mu, ambient_points, tol.rank,
                            check_id=f"{prefix}.momentum.regular_value"),
    ]


def scale_equivalence_check(sym: LieSymmetry, form: FormField, sub: SubmanifoldChart, points,
                            tol: Tolerances, prefix: str) -> rp.Entry:
    """k_mu and preimage membership must not change under mu -> 2 mu."""
    check_id = f"{prefix}.preimage.scale"
    mu = sub.value
    try:
        dist = subspace_distance(compute_k_mu(sym, mu), compute_k_mu(sym, 2.0 * mu))
    except (ArithmeticError, ValueError) as exc:
        return rp.failed(check_id, anchor(check_id), f"{type(exc).__name__}: {exc}")

    def residual(x):
        J = momentum_at(sym, form, sub.embedding(x))
        same = orbit_membership(J, mu)[0] == orbit_membership(J, 2.0 * mu)[0]
        return dist if same else float("inf")

    return _entry(check_id, points, residual, tol.rank, sub.chart)


# ---------------------------------------------------- energy hypersurface

def transversality_check(sys: ExactSymplecticSystem, level: SubmanifoldChart, points,
                         tol: float = 1e-8, check_id: str = "A.transversality") -> rp.Entry:
    """min over the level of |dh(nabla)|, which must stay above ``tol``."""
    liouville = sys.liouville

    def value(x):
        y = level.embedding(x)
        return abs(float(sys.hamiltonian.d_at(y).coeffs @ liouville(y)))

    return _entry(check_id, points, value, tol, level.chart, comparator=">")


def energy_hypersurface(sys: ExactSymplecticSystem, level: SubmanifoldChart, points,
                        tol: Tolerances = Tolerances(), prefix: str = "A") -> Stage:
    """(S, i^* theta) with its level, transversality and contact certificates."""
    if level.role != LEVEL_SET:
        raise ValueError("energy_hypersurface needs a level-set chart")
    if level.ambient.name != sys.chart.name:
        raise ValueError(f"level set must embed into {sys.chart.name!r}")
    cs = ContactStructure(level.chart, PullbackForm(level.embedding, sys.theta))
    entries = level_set_checks(sys.hamiltonian, level, points, tol, prefix)
    entries.append(transversality_check(sys, level, points, tol.transversality,
                                        f"{prefix}.transversality"))
    entries.extend(contact_checks(cs, points, tol, f"{prefix}.contact.condition",
                                  f"{prefix}.contact.reeb"))
    return Stage(cs, entries)


def contact_checks(cs: ContactStructure, points, tol: Tolerances, condition_id: str,
                   reeb_id: str) -> list:
    def reeb(x):
        return reeb_residuals(cs, reeb_field_at(cs, x), x)

    return [
        _entry(condition_id, points, lambda x: abs(cs.volume(x)), tol.contact, cs.chart,
               comparator=">"),
        _entry(reeb_id, points, reeb, tol.reeb, cs.chart),
    ]


def induced_contact_symmetry(sym: LieSymmetry, level: SubmanifoldChart, theta: FormField,
                             hamiltonian: FormField, points, tol: Tolerances = Tolerances(),
                             prefix: str = "A") -> Stage:
    """Fundamental fields on the level set, lifted through the embedding."""
    fields = [LiftedVectorField(level.embedding, f) for f in sym.fundamental_fields]
    sym_s = sym.with_fields(fields)
    eta = PullbackForm(level.embedding, theta)

    def h_invariance(x):
        y = level.embedding(x)
        dh = hamiltonian.d_at(y).coeffs
        return max(abs(float(dh @ f(y))) for f in sym.fundamental_fields)

    def tangency(x):
        return max(f.residual(x) for f in fields)

    def restriction(x):
        return _max_abs(momentum_at(sym, theta, level.embedding(x)) - momentum_at(sym_s, eta, x))

    def contact_invariance(x):
        return max(lie_derivative(f, eta, x).max_abs() for f in fields)

    entries = [
        _entry(f"{prefix}.symmetry.hamiltonian", points, h_invariance, tol.invariance, level.chart),
        _entry(f"{prefix}.symmetry.tangency", points, tangency, tol.tangency, level.chart),
        _entry(f"{prefix}.momentum.restriction", points, restriction, tol.momentum, level.chart),
        _entry(f"{prefix}.symmetry.contact_invariance", points, contact_invariance,
               tol.invariance * 10, level.chart),
    ]
    return Stage(sym_s, entries)


# ------------------------------------------------------------- quotients

def k_mu_fields(sym: LieSymmetry, qdata: QuotientChartData, basis) -> list:
    """Fields of k_mu lifted to the preimage chart."""
    return [LiftedVectorField(qdata.total.embedding, sym.field(b)) for b in basis]


def quotient_checks(qdata: QuotientChartData, kfields: Sequence, total_points, base_points,
                    tol: Tolerances, prefix: str) -> list:
    tc = qdata.total.chart

    def section(b):
        return _max_abs(qdata.projection(qdata.section(b)) - b)

    def fiber_tangency(x):
        _, J = qdata.projection.jacobian(x)
        return max((_max_abs(J @ f(x)) for f in kfields), default=0.0)

    def tangency(x):
        return max((f.residual(x) for f in kfields), default=0.0)

    out = [
        _entry(f"{prefix}.k_mu.tangency", total_points, tangency, tol.tangency, tc),
        _entry(f"{prefix}.quotient.section", base_points, section, tol.section, qdata.base),
        _entry(f"{prefix}.quotient.fiber_tangency", total_points, fiber_tangency,
               tol.fiber_tangency, tc),
        _entry(f"{prefix}.quotient.submersion", total_points,
               lambda x: _min_rel_singular(qdata.projection.jacobian(x)[1], qdata.base.dim),
               tol.rank, tc, comparator=">"),
    ]
    return out


def basic_form_check(form_on_total: FormField, kfields: Sequence, points, tol: Tolerances,
                     check_id: str) -> rp.Entry:
    def residual(x):
        a = form_on_total.at(x)
        return max((a.interior(f(x)).max_abs() for f in kfields), default=0.0)

    return _entry(check_id, points, residual, tol.basic, form_on_total.chart)


def descend(form: FormField, qdata: QuotientChartData, section: MapBase | None = None):
    """(restricted form on the preimage chart, reduced form on the base via the section)."""
    restricted = PullbackForm(qdata.total.embedding, form)
    return restricted, PullbackForm(section or qdata.section, restricted)


def pullback_identity_check(reduced: FormField, restricted: FormField, qdata: QuotientChartData,
                            points, tol: float, check_id: str, exterior: bool = False) -> rp.Entry:
    """pi^* reduced = restricted (or the same for d of both)."""
    upstairs = PullbackForm(qdata.projection, reduced)

    def residual(x):
        if exterior:
            return (upstairs.d_at(x) - restricted.d_at(x)).max_abs()
        return (upstairs.at(x) - restricted.at(x)).max_abs()

    return _entry(check_id, points, residual, tol, qdata.total.chart)


def pushforward_check(upstairs: VectorFieldBase, downstairs: VectorFieldBase, projection: MapBase,
                      points, tol: float, check_id: str) -> rp.Entry:
    def residual(x):
        y, J = projection.jacobian(x)
        return _max_abs(J @ upstairs(x) - downstairs(y))

    return _entry(check_id, points, residual, tol, projection.source)


def fiber_constancy_check(upstairs: VectorFieldBase, projection: MapBase, fibers, tol: float,
                          check_id: str) -> rp.Entry:
    """Pushforwards at all points of each fiber agree with the first point's."""
    def residual(fiber):
        vals = [projection.jacobian(x)[1] @ upstairs(x) for x in fiber]
        return max(_max_abs(v - vals[0]) for v in vals)

    starts = [f[0] for f in fibers]
    by_start = {id(f[0]): f for f in fibers}
    entry = _entry(check_id, starts, lambda x: residual(by_start[id(x)]), tol, projection.source)
    if fibers:
        entry.detail = entry.detail or f"{len(fibers)} fibers x {len(fibers[0])} points"
    return entry


def dimension_check(qdata: QuotientChartData, k_dim: int, check_id: str) -> rp.Entry:
    expected = qdata.total.chart.dim - k_dim
    return rp.single(check_id, anchor(check_id), abs(qdata.base.dim - expected), 0.0,
                     detail=f"{qdata.base.name}: {qdata.base.dim}, expected {expected}")


# ------------------------------------------------------ symplectic reduction

@dataclass
class SymplecticReduction:
    system: ExactSymplecticSystem
    restricted_theta: FormField
    restricted_h: FormField
    kfields: list
    upstairs_hamiltonian: VectorFieldBase


def symplectic_reduce(sys: ExactSymplecticSystem, sym: LieSymmetry, qdata: QuotientChartData,
                      k_basis, total_points, base_points, fibers,
                      tol: Tolerances = Tolerances(), prefix: str = "B") -> Stage:
    """theta_red = sigma^*(j^* theta), h_red = h o j o sigma, certified through tau."""
    total = qdata.total
    if total.role != MOMENTUM_PREIMAGE:
        raise ValueError("symplectic reduction needs a momentum-preimage chart")
    kfields = k_mu_fields(sym, qdata, k_basis)
    entries = preimage_checks(sym, sys.theta, total, total_points, tol, prefix)
    entries.append(scale_equivalence_check(sym, sys.theta, total, total_points, tol, prefix))
    entries.extend(quotient_checks(qdata, kfields, total_points, base_points, tol, prefix))

    j_theta, theta_red = descend(sys.theta, qdata)
    j_h, h_red = descend(sys.hamiltonian, qdata)
    reduced = ExactSymplecticSystem(qdata.base, theta_red, h_red, tol.nondegeneracy,
                                    name=f"{sys.name}/reduced")
    entries.append(basic_form_check(j_theta, kfields, total_points, tol,
                                    f"{prefix}.reduce.basic"))
    if qdata.alternate_section is not None:
        _, alt = descend(sys.theta, qdata, qdata.alternate_section)
        entries.append(_entry(f"{prefix}.reduce.section_independence", base_points,
                              lambda b: (alt.at(b) - theta_red.at(b)).max_abs(), tol.pullback,
                              qdata.base))
    entries.append(pullback_identity_check(theta_red, j_theta, qdata, total_points, tol.pullback,
                                           f"{prefix}.reduce.pullback_theta"))
    entries.append(pullback_identity_check(theta_red, j_theta, qdata, total_points, tol.pullback,
                                           f"{prefix}.reduce.pullback_omega", exterior=True))
    entries.append(pullback_identity_check(h_red, j_h, qdata, total_points, tol.pullback,
                                           f"{prefix}.reduce.pullback_h"))
    entries.append(_entry(f"{prefix}.reduce.nondegenerate", base_points,
                          lambda b: _nondegeneracy_margin(reduced, b), tol.nondegeneracy,
                          qdata.base, comparator=">"))

    liouville_up = LiftedVectorField(total.embedding, sys.liouville)
    ham_up = LiftedVectorField(total.embedding, sys.hamiltonian_field)
    entries.append(pushforward_check(liouville_up, reduced.liouville, qdata.projection,
                                     total_points, tol.pushforward,
                                     f"{prefix}.reduce.liouville_pushforward"))
    entries.append(fiber_constancy_check(liouville_up, qdata.projection, fibers,
                                         tol.fiber_constancy,
                                         f"{prefix}.reduce.liouville_fiber_constant"))
    entries.append(pushforward_check(ham_up, reduced.hamiltonian_field, qdata.projection,
                                     total_points, tol.pushforward,
                                     f"{prefix}.reduce.hamiltonian_pushforward"))
    entries.append(dimension_check(qdata, len(k_basis), f"{prefix}.reduce.dimension"))
    return Stage(SymplecticReduction(reduced, j_theta, j_h, kfields, ham_up), entries)


def _nondegeneracy_margin(system: ExactSymplecticSystem, x) -> float:
    m = system.theta.d_at(x).matrix()
    norm = float(np.max(np.sum(np.abs(m), axis=1))) if m.size else 0.0
    if norm == 0.0:
        return 0.0
    return abs(float(np.linalg.det(m))) / norm ** m.shape[0]


# ---------------------------------------------------------- contact reduction

@dataclass
class ContactReduction:
    structure: ContactStructure
    restricted_eta: FormField
    kfields: list


def contact_reduce(cs: ContactStructure, sym_s: LieSymmetry, qdata: QuotientChartData,
                   k_basis, total_points, base_points, fibers,
                   tol: Tolerances = Tolerances(), prefix: str = "A") -> Stage:
    """eta_red = sigma^*(i^* eta), certified through pi, with the Reeb fields compared."""
    total = qdata.total
    if total.role != MOMENTUM_PREIMAGE:
        raise ValueError("contact reduction needs a momentum-preimage chart")
    if total.ambient.name != cs.chart.name:
        raise ValueError(f"preimage chart must embed into {cs.chart.name!r}")
    kfields = k_mu_fields(sym_s, qdata, k_basis)
    entries = preimage_checks(sym_s, cs.eta, total, total_points, tol, prefix)
    entries.append(scale_equivalence_check(sym_s, cs.eta, total, total_points, tol, prefix))
    entries.extend(quotient_checks(qdata, kfields, total_points, base_points, tol, prefix))

    i_eta, eta_red = descend(cs.eta, qdata)
    reduced = ContactStructure(qdata.base, eta_red)
    entries.append(basic_form_check(i_eta, kfields, total_points, tol, f"{prefix}.reduce.basic"))
    if qdata.alternate_section is not None:
        _, alt = descend(cs.eta, qdata, qdata.alternate_section)
        entries.append(_entry(f"{prefix}.reduce.section_independence", base_points,
                              lambda b: (alt.at(b) - eta_red.at(b)).max_abs(), tol.pullback,
                              qdata.base))
    entries.append(pullback_identity_check(eta_red, i_eta, qdata, total_points, tol.pullback,
                                           f"{prefix}.reduce.pullback_eta"))
    entries.append(pullback_identity_check(eta_red, i_eta, qdata, total_points, tol.pullback,
                                           f"{prefix}.reduce.pullback_deta", exterior=True))
    entries.extend(contact_checks(reduced, base_points, tol, f"{prefix}.reduce.contact",
                                  f"{prefix}.reduce.reeb"))

    reeb_up = LiftedVectorField(total.embedding, cs.reeb)
    entries.append(pushforward_check(reeb_up, reduced.reeb, qdata.projection, total_points,
                                     tol.pushforward, f"{prefix}.reduce.reeb_pushforward"))
    entries.append(fiber_constancy_check(reeb_up, qdata.projection, fibers, tol.fiber_constancy,
                                         f"{prefix}.reduce.reeb_fiber_constant"))
    entries.append(dimension_check(qdata, len(k_basis), f"{prefix}.reduce.dimension"))
    return Stage(ContactReduction(reduced, i_eta, kfields), entries)


# ------------------------------------------------------------- equivalence

def equivalence_check(reduced_a: ContactStructure, restricted_b: ContactStructure,
                      kappa: MapBase, points, diagram: tuple | None = None,
                      tol: Tolerances = Tolerances(), prefix: str = "E") -> list:
    """Compare (M_red, eta_red) from restrict-then-reduce with (S_red, eta_tilde).

    ``kappa`` maps S_red to M_red.  ``diagram`` is an optional pair (i_M, j) of maps
    from M_red and S_red into the reduced phase space; without it check (b) is skipped.
    (c) and (d) are recorded with "observed" strength.
    """
    if kappa.source.name != restricted_b.chart.name or kappa.target.name != reduced_a.chart.name:
        raise ValueError(f"kappa must map {restricted_b.chart.name!r} to {reduced_a.chart.name!r}")
    chart = restricted_b.chart
    n = chart.dim

    def det(x):
        _, J = kappa.jacobian(x)
        if J.shape != (n, n):
            return 0.0
        return abs(float(np.linalg.det(J)))

    entries = [_entry(f"{prefix}.kappa.jacobian", points, det, tol.kappa_det, chart, comparator=">")]
    if diagram is None:
        entries.append(rp.skipped(f"{prefix}.kappa.diagram", anchor("kappa.diagram"),
                                  "no maps into the reduced phase space supplied"))
    else:
        i_m, j = diagram
        via_a = compose(i_m, kappa)
        entries.append(_entry(f"{prefix}.kappa.diagram", points,
                              lambda x: _max_abs(via_a(x) - j(x)), tol.diagram, chart))
    pulled = PullbackForm(kappa, reduced_a.eta)
    entries.append(_entry(f"{prefix}.kappa.contact_form", points,
                          lambda x: (pulled.at(x) - restricted_b.eta.at(x)).max_abs(),
                          tol.equivalence_form, chart, strength="observed"))

    def reeb(x):
        y, J = kappa.jacobian(x)
        return _max_abs(J @ reeb_field_at(restricted_b, x) - reeb_field_at(reduced_a, y))

    entries.append(_entry(f"{prefix}.kappa.reeb", points, reeb, tol.equivalence_reeb, chart,
                          strength="observed"))
    return entries
