"""Scenario documents: JSON descriptions of a system, its symmetry and the declared charts.

Schema ``exactred-scenario/1`` (see docs/scenario_schema.md).  Every expression is
text in the expression grammar and is parsed and checked against its chart here, so
a loaded Scenario is known to be internally consistent before anything is computed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

import numpy as np

from .expr import ExprError, parse
from .geometry import Chart, KForm, SmoothMap, VectorField
from .liegroup import LieSymmetry
from .reduction import QuotientChartData, SubmanifoldChart, Tolerances
from .symplectic import ExactSymplecticSystem

SCENARIO_SCHEMA = "exactred-scenario/1"
BUILTINS = ("example1", "example2", "helix")


class ScenarioError(ValueError):
    """Invalid scenario; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class Oracle:
    object: str
    chart: str | None
    expected: Any
    tolerance: float | None = None


@dataclass
class FlowSettings:
    starts: list = field(default_factory=list)
    t_end: float = 0.5
    step: float = 1e-3
    orbit_starts: list = field(default_factory=list)
    orbit_t_end: float = 0.2
    orbit_step: float = 1e-3
    reparametrization_points: int = 20


@dataclass
class PipelineData:
    level: SubmanifoldChart | None = None
    preimage: SubmanifoldChart | None = None
    quotient: QuotientChartData | None = None
    oracles: list = field(default_factory=list)
    flow: FlowSettings = field(default_factory=FlowSettings)


@dataclass
class Scenario:
    name: str
    description: str
    charts: dict
    system: ExactSymplecticSystem
    symmetry: LieSymmetry | None
    mu: np.ndarray | None
    level: float | None
    boxes: dict
    points: dict
    sample_count: int
    fiber_count: int
    fiber_size: int
    seed: int | None
    tolerances: Tolerances
    oracles: list
    pipeline_a: PipelineData | None
    pipeline_b: PipelineData | None
    kappa: SmoothMap | None
    fields: dict

    def chart(self, name: str) -> Chart:
        return self.charts[name]


# ------------------------------------------------------------------ helpers

def _require(obj: dict, key: str, path: str):
    if not isinstance(obj, dict):
        raise ScenarioError(path, "expected an object")
    if key not in obj:
        raise ScenarioError(f"{path}.{key}", "missing required field")
    return obj[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool):
        raise ScenarioError(path, "expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            e = parse(value)
        except ExprError as exc:
            raise ScenarioError(path, str(exc)) from None
        if e.variables:
            raise ScenarioError(path, f"constant expected, found variable {sorted(e.variables)[0]!r}")
        return float(e({}))
    raise ScenarioError(path, "expected a number or constant expression")


def _guard(path: str, fn, *args):
    try:
        return fn(*args)
    except ScenarioError:
        raise
    except (ExprError, ValueError, KeyError) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        raise ScenarioError(path, str(msg)) from None


def _chart_ref(charts: dict, name, path: str) -> Chart:
    if not isinstance(name, str) or name not in charts:
        raise ScenarioError(path, f"unknown chart {name!r}")
    return charts[name]


def _map(charts: dict, spec, source: Chart, target: Chart, path: str) -> SmoothMap:
    """A map is either {target-coord: expr} or {source, target, components}."""
    if not isinstance(spec, dict):
        raise ScenarioError(path, "expected an object")
    if "components" in spec:
        if spec.get("source", source.name) != source.name:
            raise ScenarioError(f"{path}.source", f"expected chart {source.name!r}")
        if spec.get("target", target.name) != target.name:
            raise ScenarioError(f"{path}.target", f"expected chart {target.name!r}")
        spec = spec["components"]
    return _guard(path, SmoothMap.from_mapping, source, target, spec)


def parse_point(chart: Chart, spec, path: str) -> np.ndarray:
    if isinstance(spec, dict):
        unknown = set(spec) - set(chart.coords)
        if unknown:
            raise ScenarioError(path, f"unknown coordinate {sorted(unknown)[0]!r} of chart "
                                      f"{chart.name!r}")
        missing = [c for c in chart.coords if c not in spec]
        if missing:
            raise ScenarioError(path, f"missing coordinate {missing[0]!r}")
        x = np.array([_number(spec[c], f"{path}.{c}") for c in chart.coords])
    elif isinstance(spec, list):
        if len(spec) != chart.dim:
            raise ScenarioError(path, f"chart {chart.name!r} expects {chart.dim} coordinates")
        x = np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(spec)])
    else:
        raise ScenarioError(path, "expected a point")
    if not chart.contains(x):
        raise ScenarioError(path, f"point violates the domain of chart {chart.name!r}")
    return x


# ------------------------------------------------------------------ parsing

def _charts(doc: dict):
    raw = _require(doc, "charts", "$")
    if not isinstance(raw, dict) or not raw:
        raise ScenarioError("$.charts", "expected a non-empty object")
    charts, boxes, points = {}, {}, {}
    for name, spec in raw.items():
        path = f"$.charts.{name}"
        coords = _require(spec, "coords", path)
        if not isinstance(coords, list) or not all(isinstance(c, str) for c in coords):
            raise ScenarioError(f"{path}.coords", "expected a list of names")
        domain = spec.get("domain", [])
        guard = _number(spec.get("singular_guard", 1e-8), f"{path}.singular_guard")
        chart = _guard(path, Chart, name, tuple(coords), tuple(domain), guard)
        charts[name] = chart
        if "box" in spec:
            box = spec["box"]
            if not isinstance(box, dict):
                raise ScenarioError(f"{path}.box", "expected an object")
            for c in chart.coords:
                iv = _require(box, c, f"{path}.box")
                if not isinstance(iv, list) or len(iv) != 2:
                    raise ScenarioError(f"{path}.box.{c}", "expected [low, high]")
            unknown = set(box) - set(chart.coords)
            if unknown:
                raise ScenarioError(f"{path}.box", f"unknown coordinate {sorted(unknown)[0]!r}")
            boxes[name] = {c: [_number(box[c][0], f"{path}.box.{c}[0]"),
                               _number(box[c][1], f"{path}.box.{c}[1]")] for c in chart.coords}
        points[name] = [parse_point(chart, p, f"{path}.points[{i}]")
                        for i, p in enumerate(spec.get("points", []))]
    return charts, boxes, points


def _system(doc: dict, charts: dict):
    spec = _require(doc, "system", "$")
    chart = _chart_ref(charts, _require(spec, "chart", "$.system"), "$.system.chart")
    theta = _guard("$.system.theta", KForm.one_form, chart, _require(spec, "theta", "$.system"))
    ham = _guard("$.system.hamiltonian", KForm.scalar, chart,
                 _require(spec, "hamiltonian", "$.system"))
    level = spec.get("level")
    level = None if level is None else _number(level, "$.system.level")
    system = _guard("$.system", ExactSymplecticSystem, chart, theta, ham)
    return system, level


def _symmetry(doc: dict, chart: Chart):
    spec = doc.get("symmetry")
    if spec is None:
        return None
    raw_fields = _require(spec, "fields", "$.symmetry")
    if not isinstance(raw_fields, list) or not raw_fields:
        raise ScenarioError("$.symmetry.fields", "expected a non-empty list")
    fields = [_guard(f"$.symmetry.fields[{i}]", VectorField.from_mapping, chart, f)
              for i, f in enumerate(raw_fields)]
    c = spec.get("structure_constants")
    if c is not None:
        try:
            c = np.asarray(c, dtype=float)
        except (TypeError, ValueError):
            raise ScenarioError("$.symmetry.structure_constants", "expected numbers") from None
    return _guard("$.symmetry", LieSymmetry, c, fields)


def _oracles(raw, charts: dict, path: str) -> list:
    out = []
    if raw is None:
        return out
    if not isinstance(raw, list):
        raise ScenarioError(path, "expected a list")
    for i, o in enumerate(raw):
        p = f"{path}[{i}]"
        obj = _require(o, "object", p)
        chart = o.get("chart")
        if chart is not None:
            _chart_ref(charts, chart, f"{p}.chart")
        expected = _require(o, "expected", p)
        _check_oracle_expressions(expected, charts.get(chart), f"{p}.expected")
        tol = o.get("tolerance")
        out.append(Oracle(obj, chart, expected, None if tol is None else _number(tol, f"{p}.tolerance")))
    return out


def _check_oracle_expressions(expected, chart: Chart | None, path: str):
    if chart is None:
        return
    if isinstance(expected, str):
        _guard(path, chart.expression, expected)
    elif isinstance(expected, dict):
        for k, v in expected.items():
            if k not in chart.coords:
                raise ScenarioError(path, f"unknown coordinate {k!r} of chart {chart.name!r}")
            _guard(f"{path}.{k}", chart.expression, v)
    elif isinstance(expected, list):
        for i, v in enumerate(expected):
            if isinstance(v, (str, dict)):
                _check_oracle_expressions(v, chart, f"{path}[{i}]")


def _submanifold(spec, charts: dict, ambient: Chart, role: str, value, path: str):
    chart = _chart_ref(charts, _require(spec, "chart", path), f"{path}.chart")
    emb = _map(charts, _require(spec, "embedding", path), chart, ambient, f"{path}.embedding")
    if role == "level":
        if value is None:
            raise ScenarioError("$.system.level", "a level-set chart needs the energy level")
        return _guard(path, SubmanifoldChart.level_set, chart, emb, value)
    if value is None:
        raise ScenarioError("$.mu", "a momentum preimage chart needs mu")
    return _guard(path, SubmanifoldChart.momentum_preimage, chart, emb, value)


def _quotient(spec, charts: dict, total: SubmanifoldChart, ambient_root: Chart, path: str):
    base = _chart_ref(charts, _require(spec, "base", path), f"{path}.base")
    tc = total.chart
    proj = _map(charts, _require(spec, "projection", path), tc, base, f"{path}.projection")
    sec = _map(charts, _require(spec, "section", path), base, tc, f"{path}.section")
    alt = spec.get("alternate_section")
    alt = None if alt is None else _map(charts, alt, base, tc, f"{path}.alternate_section")
    amb = spec.get("ambient_projection")
    amb = None if amb is None else _map(charts, amb, ambient_root, base,
                                        f"{path}.ambient_projection")
    return _guard(path, QuotientChartData, total, base, proj, sec, amb, alt)


def _starts(spec, chart: Chart, path: str):
    """Either a list of points or {"box": {...}, "count": n} drawn later."""
    if spec is None:
        return []
    if isinstance(spec, list):
        return [parse_point(chart, p, f"{path}[{i}]") for i, p in enumerate(spec)]
    if isinstance(spec, dict):
        box = _require(spec, "box", path)
        count = int(_number(_require(spec, "count", path), f"{path}.count"))
        for c in chart.coords:
            iv = _require(box, c, f"{path}.box")
            if not isinstance(iv, list) or len(iv) != 2:
                raise ScenarioError(f"{path}.box.{c}", "expected [low, high]")
        return {"box": {c: [_number(box[c][0], path), _number(box[c][1], path)]
                        for c in chart.coords}, "count": count}
    raise ScenarioError(path, "expected a list of points or a box")


def _flow(spec, start_chart: Chart | None, orbit_chart: Chart | None, path: str) -> FlowSettings:
    fs = FlowSettings()
    if spec is None:
        return fs
    if not isinstance(spec, dict):
        raise ScenarioError(path, "expected an object")
    for key in ("t_end", "step", "orbit_t_end", "orbit_step"):
        if key in spec:
            setattr(fs, key, _number(spec[key], f"{path}.{key}"))
    if "reparametrization_points" in spec:
        fs.reparametrization_points = int(_number(spec["reparametrization_points"],
                                                  f"{path}.reparametrization_points"))
    if fs.step <= 0 or fs.orbit_step <= 0:
        raise ScenarioError(path, "steps must be positive")
    if "starts" in spec:
        if start_chart is None:
            raise ScenarioError(f"{path}.starts", "no chart to place flow starts on")
        fs.starts = _starts(spec["starts"], start_chart, f"{path}.starts")
    if "orbit_starts" in spec:
        if orbit_chart is None:
            raise ScenarioError(f"{path}.orbit_starts", "no level-set chart for orbit starts")
        fs.orbit_starts = _starts(spec["orbit_starts"], orbit_chart, f"{path}.orbit_starts")
    return fs


def _pipeline_a(spec, charts, system, level, mu, path) -> PipelineData:
    data = PipelineData()
    if "level_set" in spec:
        data.level = _submanifold(spec["level_set"], charts, system.chart, "level", level,
                                  f"{path}.level_set")
    if "preimage" in spec:
        if data.level is None:
            raise ScenarioError(f"{path}.preimage", "needs a level_set chart to embed into")
        data.preimage = _submanifold(spec["preimage"], charts, data.level.chart, "preimage", mu,
                                     f"{path}.preimage")
    if "quotient" in spec:
        if data.preimage is None:
            raise ScenarioError(f"{path}.quotient", "needs a preimage chart")
        data.quotient = _quotient(spec["quotient"], charts, data.preimage, system.chart,
                                  f"{path}.quotient")
    data.oracles = _oracles(spec.get("oracles"), charts, f"{path}.oracles")
    orbit_chart = data.level.chart if data.level else None
    data.flow = _flow(spec.get("flow"), None, orbit_chart, f"{path}.flow")
    return data


def _pipeline_b(spec, charts, system, level, mu, path) -> PipelineData:
    data = PipelineData()
    if "preimage" in spec:
        data.preimage = _submanifold(spec["preimage"], charts, system.chart, "preimage", mu,
                                     f"{path}.preimage")
    if "quotient" in spec:
        if data.preimage is None:
            raise ScenarioError(f"{path}.quotient", "needs a preimage chart")
        data.quotient = _quotient(spec["quotient"], charts, data.preimage, system.chart,
                                  f"{path}.quotient")
    if "level_set" in spec:
        if data.quotient is None:
            raise ScenarioError(f"{path}.level_set", "needs the reduced chart of a quotient")
        data.level = _submanifold(spec["level_set"], charts, data.quotient.base, "level", level,
                                  f"{path}.level_set")
    data.oracles = _oracles(spec.get("oracles"), charts, f"{path}.oracles")
    start_chart = data.preimage.chart if data.preimage else None
    orbit_chart = data.level.chart if data.level else None
    data.flow = _flow(spec.get("flow"), start_chart, orbit_chart, f"{path}.flow")
    return data


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("$", "expected a JSON object")
    schema = doc.get("schema")
    if schema != SCENARIO_SCHEMA:
        raise ScenarioError("$.schema", f"expected {SCENARIO_SCHEMA!r}, found {schema!r}")
    charts, boxes, points = _charts(doc)
    system, level = _system(doc, charts)
    symmetry = _symmetry(doc, system.chart)
    mu = doc.get("mu")
    if mu is not None:
        mu = np.array([_number(v, f"$.mu[{i}]") for i, v in enumerate(mu)])
        if symmetry is None:
            raise ScenarioError("$.mu", "mu given without a symmetry")
        if mu.size != symmetry.dim:
            raise ScenarioError("$.mu", f"expected {symmetry.dim} components, found {mu.size}")
        if not np.any(mu):
            raise ScenarioError("$.mu", "mu must be nonzero")

    sampling = doc.get("sampling", {})
    count = int(_number(sampling.get("count", 100), "$.sampling.count"))
    fiber_count = int(_number(sampling.get("fibers", 10), "$.sampling.fibers"))
    fiber_size = int(_number(sampling.get("fiber_points", 5), "$.sampling.fiber_points"))
    seed = doc.get("seed")
    seed = None if seed is None else int(_number(seed, "$.seed"))
    tol = _guard("$.tolerances", Tolerances.from_mapping, doc.get("tolerances", {}))

    pa = pb = None
    if "pipeline_a" in doc:
        pa = _pipeline_a(doc["pipeline_a"], charts, system, level, mu, "$.pipeline_a")
    if "pipeline_b" in doc:
        pb = _pipeline_b(doc["pipeline_b"], charts, system, level, mu, "$.pipeline_b")
    kappa = None
    if "equivalence" in doc:
        spec = doc["equivalence"]
        if not (pa and pa.quotient and pb and pb.level):
            raise ScenarioError("$.equivalence", "needs a pipeline_a quotient and a "
                                                 "pipeline_b level set")
        kappa = _map(charts, _require(spec, "kappa", "$.equivalence"), pb.level.chart,
                     pa.quotient.base, "$.equivalence.kappa")

    fields = {"liouville": system.liouville, "hamiltonian": system.hamiltonian_field}
    return Scenario(
        name=str(doc.get("name", "")), description=str(doc.get("description", "")),
        charts=charts, system=system, symmetry=symmetry, mu=mu, level=level,
        boxes=boxes, points=points, sample_count=count, fiber_count=fiber_count,
        fiber_size=fiber_size, seed=seed, tolerances=tol,
        oracles=_oracles(doc.get("oracles"), charts, "$.oracles"),
        pipeline_a=pa, pipeline_b=pb, kappa=kappa, fields=fields,
    )


def builtin_text(name: str) -> str:
    if name not in BUILTINS:
        raise KeyError(name)
    return resources.files("exactred.scenarios").joinpath(f"{name}.json").read_text("utf-8")


def load_scenario(source: str | Path) -> Scenario:
    """Load a built-in scenario by name or a scenario file by path."""
    if isinstance(source, str) and source in BUILTINS:
        text, origin = builtin_text(source), source
    else:
        path = Path(source)
        if not path.is_file():
            raise ScenarioError("$", f"no scenario file {str(path)!r}")
        text, origin = path.read_text("utf-8"), str(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError("$", f"invalid JSON at line {exc.lineno} column {exc.colno}: "
                                 f"{exc.msg}") from None
    sc = scenario_from_dict(doc)
    if not sc.name:
        sc.name = Path(origin).stem
    return sc
