"""Runs the checks of a scenario in a fixed order and collects them into one report.

Order: ambient system (P), restrict-then-reduce (A), reduce-then-restrict (B),
equivalence (E).  Within a block the order is the order of construction.
"""

from __future__ import annotations

import numpy as np

from . import report as rp
from .catalog import anchor
from .contact import reeb_field_at
from .flows import flow_commutation_check, reparametrization_check
from .geometry import KForm, VectorField, bracket, compose
from .liegroup import (
    ClosureError, bracket_compatibility_check, closure_residual, compute_k_mu,
    infinitesimal_equivariance_check, invariance_check, function_invariance_check, momentum_at,
    subspace_distance,
)
from .reduction import (
    contact_reduce, energy_hypersurface, equivalence_check, induced_contact_symmetry,
    k_mu_fields, symplectic_reduce,
)
from .sampling import Sampler, fiber_points, resolve_seed, sample_box
from .scenario import FlowSettings, Scenario
from .symplectic import closedness_residual, liouville_residual, omega_at

PIPELINES = {"A": "restrict-then-reduce", "B": "reduce-then-restrict", "both": "both"}
_ALIASES = {"A": "A", "restrict-then-reduce": "A", "B": "B", "reduce-then-restrict": "B",
            "both": "both"}


class Context:
    """Sample points and constructed objects shared by the blocks of one run."""

    def __init__(self, scenario: Scenario, seed: int):
        self.scenario = scenario
        self.seed = seed
        self.tol = scenario.tolerances
        self.sampler = Sampler(seed, scenario.sample_count)
        for name, chart in scenario.charts.items():
            if name in scenario.boxes or scenario.points.get(name):
                self.sampler.declare(chart, scenario.boxes.get(name), scenario.points.get(name, ()))
        self.objects: dict = {}

    def points(self, chart, count=None) -> list:
        if not self.sampler.has(chart):
            return []
        return self.sampler.points(chart, count)

    def starts(self, spec, chart, stream: str) -> list:
        if isinstance(spec, dict):
            return sample_box(chart, spec["box"], spec["count"], self.seed, stream)
        return list(spec)

    def fibers(self, total_chart, kfields) -> list:
        sc = self.scenario
        return [fiber_points(x, kfields, sc.fiber_size, self.seed, total_chart)
                for x in self.points(total_chart)[:sc.fiber_count]]


def _guarded(check_id: str, fn):
    """Run a block; construction errors become one failed entry instead of an abort."""
    try:
        return fn()
    except (ArithmeticError, ValueError, np.linalg.LinAlgError, KeyError) as exc:
        return [rp.failed(check_id, anchor(check_id) if "." in check_id else check_id,
                          f"{type(exc).__name__}: {exc}")]


# -------------------------------------------------------------- ambient

def system_block(ctx: Context) -> list:
    sc = ctx.scenario
    sys = sc.system
    tol = ctx.tol
    pts = ctx.points(sys.chart)
    chart = sys.chart

    def nondeg(x):
        m = omega_at(sys, x)
        norm = float(np.max(np.sum(np.abs(m), axis=1)))
        return abs(float(np.linalg.det(m))) / norm ** m.shape[0] if norm else 0.0

    out = [
        rp.measure("P.omega.nondegenerate", anchor("omega.nondegenerate"), pts, nondeg,
                   tol.nondegeneracy, chart=chart, comparator=">"),
        rp.measure("P.omega.closed", anchor("omega.closed"), pts,
                   lambda x: closedness_residual(sys, x), 1e-9, chart=chart),
        rp.measure("P.liouville.contraction", anchor("liouville.contraction"), pts,
                   lambda x: liouville_residual(sys, x), 1e-10, chart=chart),
    ]
    sym = sc.symmetry
    if sym is not None:
        liou = sys.liouville
        out += [
            invariance_check(sym, sys.theta, pts, tol.invariance, "P.symmetry.invariance"),
            function_invariance_check(sym, sys.hamiltonian, pts, tol.invariance,
                                      "P.symmetry.hamiltonian"),
            bracket_compatibility_check(sym, pts, tol.brackets, "P.symmetry.brackets"),
            rp.measure("P.symmetry.liouville", anchor("symmetry.liouville"), pts,
                       lambda x: max(float(np.max(np.abs(bracket(f, liou, x))))
                                     for f in sym.fundamental_fields),
                       tol.brackets, chart=chart),
            infinitesimal_equivariance_check(sym, sys.theta, pts, tol.momentum,
                                             "P.momentum.equivariance"),
        ]
    registry = {
        "liouville": ("vector", chart, sys.liouville),
        "hamiltonian_field": ("vector", chart, sys.hamiltonian_field),
    }
    if sym is not None:
        registry["momentum"] = ("values", chart, lambda x: momentum_at(sym, sys.theta, x))
    out += oracle_entries(ctx, "P", sc.oracles, registry)
    return out


# -------------------------------------------------------------- oracles

def _expected_fn(kind: str, chart, expected):
    if kind == "form":
        form = KForm.one_form(chart, expected)
        return lambda x: form.at(x).coeffs
    if kind == "scalar":
        e = chart.expression(expected)
        return lambda x: np.array([e(chart.as_dict(x))])
    if kind == "vector":
        f = VectorField.from_mapping(chart, expected)
        return f
    if kind == "values":
        exprs = [chart.expression(s) for s in expected]
        return lambda x: np.array([e(chart.as_dict(x)) for e in exprs])
    if kind == "fields":
        fs = [VectorField.from_mapping(chart, t) for t in expected]
        return lambda x: np.concatenate([f(x) for f in fs])
    raise ValueError(f"unknown oracle kind {kind!r}")


def oracle_entries(ctx: Context, prefix: str, oracles, registry: dict) -> list:
    out = []
    for o in oracles:
        check_id = f"{prefix}.oracle.{o.object}"
        if o.object not in registry:
            out.append(rp.failed(check_id, anchor(check_id), f"no computed object {o.object!r} "
                                 f"in this pipeline"))
            continue
        kind, chart, computed = registry[o.object]
        tol = o.tolerance if o.tolerance is not None else ctx.tol.oracle
        if kind == "subspace":
            try:
                dist = subspace_distance(np.asarray(o.expected, dtype=float), computed())
            except (ArithmeticError, ValueError) as exc:
                out.append(rp.failed(check_id, anchor(check_id), f"{type(exc).__name__}: {exc}"))
                continue
            out.append(rp.single(check_id, anchor(check_id), dist, tol))
            continue
        if o.chart is not None and o.chart != chart.name:
            out.append(rp.failed(check_id, anchor(check_id),
                                 f"{o.object} lives on chart {chart.name!r}, not {o.chart!r}"))
            continue
        try:
            expected = _expected_fn(kind, chart, o.expected)
        except ValueError as exc:
            out.append(rp.failed(check_id, anchor(check_id), str(exc)))
            continue
        pts = ctx.points(chart)
        out.append(rp.measure(check_id, anchor(check_id), pts,
                              lambda x: float(np.max(np.abs(np.asarray(computed(x)) - expected(x)))),
                              tol, chart=chart))
    return out


def _k_mu_entry(prefix: str, sym, mu):
    check_id = f"{prefix}.k_mu.closure"
    try:
        basis = compute_k_mu(sym, mu)
    except (ClosureError, ValueError) as exc:
        return None, rp.failed(check_id, "k_mu is a Lie subalgebra", f"{type(exc).__name__}: {exc}")
    return basis, rp.single(check_id, "k_mu = ker mu intersected with g_[mu] is closed under the bracket",
                            closure_residual(sym.structure_constants, basis), 1e-10,
                            detail=f"dim k_mu = {len(basis)}")


def _reparametrization(ctx, prefix, ham_field, level, cs, flow: FlowSettings) -> list:
    pts = ctx.points(level.chart, flow.reparametrization_points)
    starts = ctx.starts(flow.orbit_starts, level.chart, f"{prefix}/orbit")
    entries = reparametrization_check(ham_field, level.embedding, cs, pts, starts,
                                      flow.orbit_t_end, flow.orbit_step, ctx.tol.angle,
                                      ctx.tol.factor, ctx.tol.hausdorff,
                                      prefix=f"{prefix}.reparametrization")
    for e in entries:
        e.anchor = anchor(e.check_id)
    return entries


# -------------------------------------------------- restrict then reduce

def pipeline_a_block(ctx: Context) -> list:
    sc = ctx.scenario
    data = sc.pipeline_a
    tol = ctx.tol
    sys = sc.system
    if data is None or data.level is None:
        return [rp.skipped("A.level.value", anchor("level.value"),
                           "scenario declares no restrict-then-reduce data")]
    level = data.level
    s_pts = ctx.points(level.chart)
    stage = energy_hypersurface(sys, level, s_pts, tol, "A")
    out = list(stage.entries)
    cs = stage.value
    ctx.objects["A.contact"] = cs
    out += _guarded("A.reparametrization.angle", lambda: _reparametrization(
        ctx, "A", sys.hamiltonian_field, level, cs, data.flow))
    registry = {
        "eta": ("form", level.chart, lambda x: cs.eta.at(x).coeffs),
        "reeb": ("vector", level.chart, lambda x: reeb_field_at(cs, x)),
    }
    sym = sc.symmetry
    if sym is not None:
        sym_stage = induced_contact_symmetry(sym, level, sys.theta, sys.hamiltonian, s_pts, tol, "A")
        out += sym_stage.entries
        sym_s = sym_stage.value
        registry["induced_fields"] = ("fields", level.chart,
                                      lambda x: np.concatenate([f(x) for f in sym_s.fundamental_fields]))
        registry["contact_momentum"] = ("values", level.chart,
                                        lambda x: momentum_at(sym_s, cs.eta, x))
        if data.quotient is not None and sc.mu is not None:
            basis, entry = _k_mu_entry("A", sym_s, sc.mu)
            out.append(entry)
            if basis is not None:
                registry["k_mu"] = ("subspace", None, lambda: basis)
                out += _guarded("A.reduce.dimension", lambda: _contact_reduction(
                    ctx, cs, sym_s, data.quotient, basis, registry))
    out += oracle_entries(ctx, "A", data.oracles, registry)
    return out


def _contact_reduction(ctx, cs, sym_s, qdata, basis, registry) -> list:
    total = qdata.total
    kfields = k_mu_fields(sym_s, qdata, basis)
    stage = contact_reduce(cs, sym_s, qdata, basis, ctx.points(total.chart),
                           ctx.points(qdata.base), ctx.fibers(total.chart, kfields), ctx.tol, "A")
    red = stage.value.structure
    ctx.objects["A.reduced"] = red
    registry["eta_red"] = ("form", red.chart, lambda x: red.eta.at(x).coeffs)
    registry["reeb_red"] = ("vector", red.chart, lambda x: reeb_field_at(red, x))
    return stage.entries


# -------------------------------------------------- reduce then restrict

def pipeline_b_block(ctx: Context) -> list:
    sc = ctx.scenario
    data = sc.pipeline_b
    tol = ctx.tol
    sys = sc.system
    sym = sc.symmetry
    if data is None or data.quotient is None or sym is None or sc.mu is None:
        return [rp.skipped("B.preimage.membership", anchor("preimage.membership"),
                           "scenario declares no reduce-then-restrict data")]
    qdata = data.quotient
    total = qdata.total
    out = []
    registry = {}
    basis, entry = _k_mu_entry("B", sym, sc.mu)
    out.append(entry)
    if basis is None:
        return out
    registry["k_mu"] = ("subspace", None, lambda: basis)
    kfields = k_mu_fields(sym, qdata, basis)

    def reduce():
        stage = symplectic_reduce(sys, sym, qdata, basis, ctx.points(total.chart),
                                  ctx.points(qdata.base), ctx.fibers(total.chart, kfields), tol, "B")
        ctx.objects["B.reduction"] = stage.value
        return stage.entries

    out += _guarded("B.reduce.dimension", reduce)
    red = ctx.objects.get("B.reduction")
    if red is None:
        return out + oracle_entries(ctx, "B", data.oracles, registry)
    rsys = red.system
    registry.update({
        "theta_red": ("form", rsys.chart, lambda x: rsys.theta.at(x).coeffs),
        "h_red": ("scalar", rsys.chart, lambda x: rsys.hamiltonian.at(x).coeffs),
        "liouville_red": ("vector", rsys.chart, rsys.liouville),
        "hamiltonian_red": ("vector", rsys.chart, rsys.hamiltonian_field),
    })
    flow = data.flow
    starts = _guarded("B.flow.commutation",
                      lambda: ctx.starts(flow.starts, total.chart, "B/flow"))
    if starts and isinstance(starts[0], rp.Entry):
        out += starts
    else:
        e = flow_commutation_check(red.upstairs_hamiltonian, rsys.hamiltonian_field,
                                   qdata.projection, starts, flow.t_end, flow.step,
                                   tol.commutation, "B.flow.commutation")
        e.anchor = anchor(e.check_id)
        out.append(e)

    if data.level is not None:
        level = data.level
        stage = energy_hypersurface(rsys, level, ctx.points(level.chart), tol, "B")
        out += stage.entries
        cs = stage.value
        ctx.objects["B.contact"] = cs
        registry["eta_tilde"] = ("form", level.chart, lambda x: cs.eta.at(x).coeffs)
        registry["reeb_tilde"] = ("vector", level.chart, lambda x: reeb_field_at(cs, x))
        out += _guarded("B.reparametrization.angle", lambda: _reparametrization(
            ctx, "B", rsys.hamiltonian_field, level, cs, flow))
    out += oracle_entries(ctx, "B", data.oracles, registry)
    return out


# ------------------------------------------------------------ equivalence

def equivalence_block(ctx: Context) -> list:
    sc = ctx.scenario
    red_a = ctx.objects.get("A.reduced")
    cs_b = ctx.objects.get("B.contact")
    if sc.kappa is None:
        return [rp.skipped("E.kappa.jacobian", anchor("kappa.jacobian"),
                           "scenario declares no kappa")]
    if red_a is None or cs_b is None:
        return [rp.failed("E.kappa.jacobian", anchor("kappa.jacobian"),
                          "a pipeline did not produce its reduced contact manifold")]
    diagram = None
    qa = sc.pipeline_a.quotient
    qb = sc.pipeline_b.quotient
    if qb.ambient_projection is not None:
        i_m = compose(qb.ambient_projection, sc.pipeline_a.level.embedding, qa.total.embedding,
                      qa.section)
        diagram = (i_m, sc.pipeline_b.level.embedding)
    return equivalence_check(red_a, cs_b, sc.kappa, ctx.points(cs_b.chart), diagram, ctx.tol, "E")


def run_pipeline(scenario: Scenario, which: str = "both", seed: int | None = None) -> rp.VerificationReport:
    """Run the ambient checks, then pipeline A and/or B, then (for ``both``) the equivalence block."""
    if which not in _ALIASES:
        raise ValueError(f"unknown pipeline {which!r}; expected A, B or both")
    which = _ALIASES[which]
    seed = resolve_seed(seed, scenario.seed)
    ctx = Context(scenario, seed)
    report = rp.VerificationReport(scenario.name, PIPELINES[which], seed)
    report.extend(system_block(ctx))
    if which in ("A", "both"):
        report.extend(pipeline_a_block(ctx))
    if which in ("B", "both"):
        report.extend(pipeline_b_block(ctx))
    if which == "both":
        report.extend(equivalence_block(ctx))
    return report


# ------------------------------------------------------------ named fields

FIELD_NAMES = ("hamiltonian", "liouville", "reeb", "reduced_reeb", "reduced_hamiltonian",
               "reduced_liouville", "restricted_reeb")


def _reduced_contact(sc: Scenario):
    data = sc.pipeline_a
    if data is None or data.level is None:
        raise ValueError(f"scenario {sc.name!r} declares no energy level set")
    cs = energy_hypersurface(sc.system, data.level, []).value
    return cs, data


def _reduced_system(sc: Scenario):
    data = sc.pipeline_b
    if data is None or data.quotient is None or sc.symmetry is None or sc.mu is None:
        raise ValueError(f"scenario {sc.name!r} declares no reduce-then-restrict data")
    basis = compute_k_mu(sc.symmetry, sc.mu)
    return symplectic_reduce(sc.system, sc.symmetry, data.quotient, basis, [], [], []).value, data


def named_field(sc: Scenario, name: str):
    """Build one of FIELD_NAMES for the scenario without running any check.

    reeb lives on the energy level set, reduced_reeb on the contact quotient, the
    reduced_* symplectic fields on the reduced phase space and restricted_reeb on the
    level set of the reduced Hamiltonian.
    """
    if name in sc.fields:
        return sc.fields[name]
    if name == "reeb":
        return _reduced_contact(sc)[0].reeb
    if name == "reduced_reeb":
        cs, data = _reduced_contact(sc)
        if data.quotient is None or sc.symmetry is None or sc.mu is None:
            raise ValueError(f"scenario {sc.name!r} declares no contact quotient")
        sym_s = induced_contact_symmetry(sc.symmetry, data.level, sc.system.theta,
                                         sc.system.hamiltonian, []).value
        basis = compute_k_mu(sym_s, sc.mu)
        return contact_reduce(cs, sym_s, data.quotient, basis, [], [], []).value.structure.reeb
    if name in ("reduced_hamiltonian", "reduced_liouville"):
        red, _ = _reduced_system(sc)
        return red.system.hamiltonian_field if name == "reduced_hamiltonian" else red.system.liouville
    if name == "restricted_reeb":
        red, data = _reduced_system(sc)
        if data.level is None:
            raise ValueError(f"scenario {sc.name!r} declares no reduced level set")
        return energy_hypersurface(red.system, data.level, []).value.reeb
    raise ValueError(f"unknown field {name!r}; expected one of {', '.join(FIELD_NAMES)}")
