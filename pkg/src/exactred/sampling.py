"""Deterministic sample points inside chart boxes, and points along group fibers."""

from __future__ import annotations

import os
import zlib
from typing import Mapping, Sequence

import numpy as np

from .geometry import Chart, LinearCombinationField
from .flows import FlowSpec, integrate

DEFAULT_SEED = 42
MAX_REDRAWS = 1000
SEED_ENV = "MMW_SEED"


class SamplingError(ValueError):
    """The rejection sampler exhausted its redraw budget."""


def resolve_seed(seed: int | None = None, fallback: int | None = None) -> int:
    """Explicit seed, else $MMW_SEED, else ``fallback``, else 42."""
    if seed is not None:
        return int(seed)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        return int(env)
    return DEFAULT_SEED if fallback is None else int(fallback)


def chart_rng(seed: int, chart: Chart, stream: str = "") -> np.random.Generator:
    # independent per chart so adding a chart never shifts another chart's points
    return np.random.default_rng([seed, zlib.crc32(f"{chart.name}/{stream}".encode())])


def box_arrays(chart: Chart, box: Mapping[str, Sequence[float]]):
    missing = [c for c in chart.coords if c not in box]
    if missing:
        raise ValueError(f"sample box of chart {chart.name!r} lacks coordinate {missing[0]!r}")
    lo = np.array([float(box[c][0]) for c in chart.coords])
    hi = np.array([float(box[c][1]) for c in chart.coords])
    if np.any(hi < lo):
        raise ValueError(f"sample box of chart {chart.name!r} has an empty interval")
    return lo, hi


def sample_box(chart: Chart, box, count: int, seed: int, stream: str = "",
               max_redraws: int = MAX_REDRAWS) -> list:
    """``count`` points uniform in ``box`` satisfying the chart's domain constraints."""
    rng = chart_rng(seed, chart, stream)
    lo, hi = box_arrays(chart, box)
    out = []
    redraws = 0
    while len(out) < count:
        x = lo + (hi - lo) * rng.random(chart.dim)
        if chart.contains(x):
            out.append(x)
            continue
        redraws += 1
        if redraws > max_redraws:
            raise SamplingError(f"chart {chart.name!r}: more than {max_redraws} rejected draws")
    return out


class Sampler:
    """Caches sample points per chart so every check sees the same set."""

    def __init__(self, seed: int = DEFAULT_SEED, count: int = 100):
        self.seed = seed
        self.count = count
        self.boxes: dict = {}
        self.explicit: dict = {}
        self._cache: dict = {}

    def declare(self, chart: Chart, box=None, points=()):
        if box is not None:
            box_arrays(chart, box)
            self.boxes[chart.name] = box
        pts = [chart.point(p) for p in points]
        for p in pts:
            if not chart.contains(p):
                raise ValueError(f"explicit point {chart.as_dict(p)} violates the domain of "
                                 f"chart {chart.name!r}")
        self.explicit[chart.name] = pts

    def has(self, chart: Chart) -> bool:
        return chart.name in self.boxes or bool(self.explicit.get(chart.name))

    def points(self, chart: Chart, count: int | None = None) -> list:
        count = self.count if count is None else count
        key = (chart.name, count)
        if key not in self._cache:
            pts = list(self.explicit.get(chart.name, ()))
            if chart.name in self.boxes:
                pts += sample_box(chart, self.boxes[chart.name], max(0, count - len(pts)),
                                  self.seed)
            self._cache[key] = pts
        return self._cache[key]


def fiber_points(start, fields: Sequence, count: int, seed: int, chart: Chart,
                 spread: float = 0.5, steps: int = 10) -> list:
    """``start`` plus points reached by flowing along random combinations of ``fields``.

    Flows that leave the chart domain are redrawn with a smaller spread.
    """
    start = np.asarray(start, dtype=float)
    pts = [start]
    if not fields:
        return pts
    rng = np.random.default_rng([seed, zlib.crc32(start.tobytes())])
    attempts = 0
    s = spread
    while len(pts) < count:
        w = rng.uniform(-s, s, len(fields))
        field = LinearCombinationField(list(fields), w)
        traj = integrate(FlowSpec(field, 1.0, 1.0 / steps), start, chart)
        attempts += 1
        if traj.event is None:
            pts.append(traj.end)
        elif attempts > MAX_REDRAWS:
            raise SamplingError(f"cannot generate fiber points inside chart {chart.name!r}")
        else:
            s *= 0.8
    return pts
