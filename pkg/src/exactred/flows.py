"""Fixed-step RK4 integration and the dynamical consistency checks built on it."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from . import report as rp
from .contact import ContactStructure, reeb_field_at
from .geometry import Chart, MapBase, angle_between

DOMAIN_EXIT = "domain-exit"


@dataclass(frozen=True)
class FlowSpec:
    field: Callable
    t_end: float
    step: float
    method: str = "rk4"

    def __post_init__(self):
        if self.method != "rk4":
            raise ValueError(f"unsupported method {self.method!r}")
        if not self.step > 0:
            raise ValueError("step must be positive")
        if self.t_end != 0 and self.step > abs(self.t_end):
            raise ValueError("step must not exceed |t_end|")


@dataclass
class Trajectory:
    times: np.ndarray
    points: np.ndarray
    event: str | None = None

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def to_records(self) -> str:
        lines = []
        for t, x in zip(self.times, self.points):
            lines.append(", ".join(format(float(v), ".17g") for v in (t, *x)))
        return "\n".join(lines) + "\n"


def rk4_step(f: Callable, x: np.ndarray, h: float) -> np.ndarray:
    k1 = f(x)
    k2 = f(x + 0.5 * h * k1)
    k3 = f(x + 0.5 * h * k2)
    k4 = f(x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def integrate(spec: FlowSpec, start, chart: Chart | None = None) -> Trajectory:
    """Integrate from ``start`` to ``spec.t_end`` (negative times flow backwards).

    Leaving ``chart``'s domain halts the integration with a domain-exit event.
    """
    chart = chart if chart is not None else getattr(spec.field, "chart", None)
    x = np.asarray(start, dtype=float).copy()
    if spec.t_end == 0:
        return Trajectory(np.array([0.0]), x[None, :].copy())
    n = max(1, int(math.ceil(abs(spec.t_end) / spec.step - 1e-9)))
    h = spec.t_end / n
    times = [0.0]
    points = [x.copy()]
    for i in range(1, n + 1):
        x = rk4_step(spec.field, x, h)
        if chart is not None and not chart.contains(x):
            return Trajectory(np.array(times), np.array(points), DOMAIN_EXIT)
        times.append(i * h)
        points.append(x.copy())
    return Trajectory(np.array(times), np.array(points))


# ----------------------------------------------------------- commutation

def commutation_defect(upstairs, downstairs, projection: MapBase, starts: Sequence,
                       t_end: float, step: float) -> tuple:
    """max over starts and grid times of ||pi(F_t(p)) - K_t(pi(p))||_inf, with its start."""
    worst, witness = 0.0, None
    for p in starts:
        up = integrate(FlowSpec(upstairs, t_end, step), p)
        down = integrate(FlowSpec(downstairs, t_end, step), projection(p))
        if up.event or down.event:
            return math.inf, p
        projected = np.array([projection(x) for x in up.points])
        d = float(np.max(np.abs(projected - down.points)))
        if d > worst:
            worst, witness = d, p
    return worst, witness


def flow_commutation_check(upstairs, downstairs, projection: MapBase, starts, t_end: float,
                           step: float, tol: float = 1e-6,
                           check_id: str = "flow.commutation") -> rp.Entry:
    if len(starts) == 0:
        return rp.skipped(check_id, "projected flow equals reduced flow", "no start points")
    try:
        worst, witness = commutation_defect(upstairs, downstairs, projection, starts, t_end, step)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return rp.failed(check_id, "projected flow equals reduced flow",
                         f"{type(exc).__name__}: {exc}")
    chart = projection.source
    return rp.single(check_id, "projected flow equals reduced flow: pi o F_t = K_t o pi",
                     worst, tol, witness=rp._witness(chart, witness),
                     detail=f"t_end={t_end:g}, step={step:g}, starts={len(starts)}")


# ------------------------------------------------------ reparametrization

def proportionality(ham_field, embedding: MapBase, cs: ContactStructure, x):
    """(angle, factor f) with X_h(i(x)) = f * di(R(x))."""
    y, J = embedding.jacobian(x)
    r = J @ reeb_field_at(cs, x)
    xh = np.asarray(ham_field(y))
    return angle_between(r, xh), float(xh @ r / (r @ r))


def _polyline_distance(points: np.ndarray, poly: np.ndarray) -> float:
    """max over ``points`` of the distance to the polyline ``poly``."""
    a = poly[:-1]
    b = poly[1:]
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom[denom == 0] = 1.0
    worst = 0.0
    for p in points:
        t = np.clip(np.einsum("ij,ij->i", p - a, ab) / denom, 0.0, 1.0)
        proj = a + t[:, None] * ab
        worst = max(worst, float(np.min(np.linalg.norm(proj - p, axis=1))))
    return worst


def _truncate_to_length(poly: np.ndarray, length: float) -> np.ndarray:
    seg = np.linalg.norm(np.diff(poly, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] <= length:
        return poly
    k = int(np.searchsorted(cum, length))
    frac = (length - cum[k - 1]) / seg[k - 1]
    end = poly[k - 1] + frac * (poly[k] - poly[k - 1])
    return np.vstack([poly[:k], end])


def orbit_hausdorff(ham_field, embedding: MapBase, cs: ContactStructure, start, t_end: float,
                    step: float, max_steps: int = 200000) -> float:
    """Hausdorff distance in the ambient chart between Reeb and Hamiltonian orbit arcs of equal length."""
    reeb = integrate(FlowSpec(cs.reeb, t_end, step), start, cs.chart)
    if reeb.event:
        return math.inf
    arc_r = np.array([embedding(x) for x in reeb.points])
    length = float(np.sum(np.linalg.norm(np.diff(arc_r, axis=0), axis=1)))
    _, f = proportionality(ham_field, embedding, cs, start)
    h = math.copysign(step / max(abs(f), 1e-12), f)
    y = arc_r[0].copy()
    arc_h = [y.copy()]
    travelled = 0.0
    for _ in range(max_steps):
        if travelled >= length:
            break
        y_next = rk4_step(ham_field, y, h)
        travelled += float(np.linalg.norm(y_next - y))
        y = y_next
        arc_h.append(y.copy())
    arc_h = _truncate_to_length(np.array(arc_h), length)
    return max(_polyline_distance(arc_r, arc_h), _polyline_distance(arc_h, arc_r))


def reparametrization_check(ham_field, embedding: MapBase, cs: ContactStructure, points,
                            orbit_starts, t_end: float, step: float = 1e-3,
                            angle_tol: float = 1e-8, factor_tol: float = 1e-12,
                            hausdorff_tol: float = 1e-5, prefix: str = "A.reparametrization"):
    """Hamiltonian flow restricted to the level set is a rescaled Reeb flow."""
    chart = cs.chart
    entries = [
        rp.measure(f"{prefix}.angle", "X_h along the level set is parallel to the Reeb field",
                   points, lambda x: proportionality(ham_field, embedding, cs, x)[0], angle_tol,
                   chart=chart),
        rp.measure(f"{prefix}.factor", "the rescaling factor X_h = f R is nonzero",
                   points, lambda x: abs(proportionality(ham_field, embedding, cs, x)[1]),
                   factor_tol, chart=chart, comparator=">"),
        rp.measure(f"{prefix}.orbits", "Reeb and Hamiltonian orbits coincide as point sets",
                   orbit_starts, lambda x: orbit_hausdorff(ham_field, embedding, cs, x, t_end, step),
                   hausdorff_tol, chart=chart),
    ]
    return entries
