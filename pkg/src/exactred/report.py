"""Verification reports: per-check entries with residuals, status and witness points."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .expr import ExprError

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"
REPORT_SCHEMA = "exactred-report/1"


@dataclass
class Entry:
    check_id: str
    anchor: str
    residual: float | None
    tolerance: float | None
    status: str
    comparator: str = "<="
    witness: dict | None = None
    detail: str = ""
    strength: str = "theorem"

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def to_json(self) -> dict:
        out = {
            "check_id": self.check_id,
            "anchor": self.anchor,
            "residual": self.residual,
            "comparator": self.comparator,
            "tolerance": self.tolerance,
            "status": self.status,
            "strength": self.strength,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        if self.detail:
            out["detail"] = self.detail
        return out


@dataclass
class VerificationReport:
    scenario: str = ""
    pipeline: str = ""
    seed: int | None = None
    entries: list = field(default_factory=list)

    def add(self, entry: Entry) -> Entry:
        self.entries.append(entry)
        return entry

    def extend(self, entries: Iterable[Entry]):
        for e in entries:
            self.add(e)

    @property
    def overall(self) -> str:
        active = [e for e in self.entries if e.status != SKIPPED]
        if not active:
            return SKIPPED
        return PASS if all(e.status == PASS for e in active) else FAIL

    def failures(self) -> list:
        return [e for e in self.entries if e.status == FAIL]

    def get(self, check_id: str) -> Entry:
        for e in self.entries:
            if e.check_id == check_id:
                return e
        raise KeyError(check_id)

    @property
    def exit_code(self) -> int:
        return {PASS: 0, FAIL: 1, SKIPPED: 2}[self.overall]

    def to_json(self) -> dict:
        return {
            "schema": REPORT_SCHEMA,
            "scenario": self.scenario,
            "pipeline": self.pipeline,
            "seed": self.seed,
            "overall": self.overall,
            "entries": [e.to_json() for e in self.entries],
        }


# ------------------------------------------------------------- building

def _compare(value: float, tol: float, comparator: str) -> bool:
    if value is None or not math.isfinite(value):
        return False
    return value <= tol if comparator == "<=" else value > tol


def measure(
    check_id: str,
    anchor: str,
    points: Sequence,
    residual: Callable,
    tol: float,
    *,
    chart=None,
    comparator: str = "<=",
    strength: str = "theorem",
) -> Entry:
    """Evaluate ``residual`` at each point; aggregate by max ("<=") or min (">").

    Evaluation errors at a point fail the entry with that point as the witness.
    """
    if len(points) == 0:
        return Entry(check_id, anchor, None, tol, SKIPPED, comparator, detail="no sample points",
                     strength=strength)
    worst = None
    worst_pt = None
    for x in points:
        try:
            r = float(residual(x))
        except (ExprError, ArithmeticError, np.linalg.LinAlgError, ValueError) as exc:
            return Entry(check_id, anchor, None, tol, FAIL, comparator,
                         witness=_witness(chart, x), detail=f"{type(exc).__name__}: {exc}",
                         strength=strength)
        if math.isnan(r):
            worst, worst_pt = r, x
            break
        if worst is None or (r > worst if comparator == "<=" else r < worst):
            worst, worst_pt = r, x
    ok = _compare(worst, tol, comparator)
    return Entry(check_id, anchor, worst, tol, PASS if ok else FAIL, comparator,
                 witness=None if ok else _witness(chart, worst_pt), strength=strength)


def single(check_id: str, anchor: str, value: float, tol: float, comparator: str = "<=",
           detail: str = "", witness=None, strength: str = "theorem") -> Entry:
    ok = _compare(value, tol, comparator)
    return Entry(check_id, anchor, value, tol, PASS if ok else FAIL, comparator,
                 witness=None if ok else witness, detail=detail, strength=strength)


def skipped(check_id: str, anchor: str, reason: str) -> Entry:
    return Entry(check_id, anchor, None, None, SKIPPED, detail=reason)


def failed(check_id: str, anchor: str, reason: str, witness=None) -> Entry:
    return Entry(check_id, anchor, None, None, FAIL, witness=witness, detail=reason)


def _witness(chart, x):
    if x is None:
        return None
    x = [float(v) for v in np.atleast_1d(x)]
    if chart is not None and len(x) == chart.dim:
        return {"chart": chart.name, **dict(zip(chart.coords, x))}
    return {"point": x}


# ------------------------------------------------------------- emitting

def _fmt_float(v: float) -> str:
    if v is None or not math.isfinite(v):
        return "null"
    text = format(v, ".17g")
    return text if ("e" in text or "." in text) else text + ".0"


def _dump(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, int):
        return str(obj)
    if isinstance(obj, float):
        return _fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_dump(str(k), indent, level + 1)}: {_dump(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{_dump(v, indent, level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if isinstance(obj, np.generic):
        return _dump(obj.item(), indent, level)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_json_text(report: VerificationReport) -> str:
    """Stable JSON; floats carry 17 significant digits."""
    return _dump(report.to_json(), 2, 0) + "\n"


def to_human(report: VerificationReport) -> str:
    rows = [("check", "status", "value", "", "tolerance")]
    for e in report.entries:
        val = "-" if e.residual is None else f"{e.residual:.3e}"
        tol = "-" if e.tolerance is None else f"{e.tolerance:.1e}"
        rows.append((e.check_id, e.status.upper(), val, e.comparator, tol))
    widths = [max(len(r[i]) for r in rows) for i in range(5)]
    lines = [f"scenario: {report.scenario}   pipeline: {report.pipeline}   seed: {report.seed}"]
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip())
    for e in report.failures():
        lines.append(f"FAILED {e.check_id}: {e.detail or e.anchor}")
        if e.witness:
            lines.append(f"  witness: {e.witness}")
    verdict = {"pass": "PASS", "fail": "FAIL", "skipped": "NOTHING VERIFIED"}[report.overall]
    lines.append(f"overall: {verdict}")
    return "\n".join(lines) + "\n"
