"""Point-wise exterior calculus on coordinate charts.

Forms are stored as coefficient arrays over strictly increasing multi-indices
(ordered as ``itertools.combinations``).  Every operation here returns numbers
evaluated at a point; nothing is simplified symbolically.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .expr import DEFAULT_SINGULAR_GUARD, EvaluationError, Expression, parse


class DegreeError(ValueError):
    pass


# ----------------------------------------------------------- index tables

@lru_cache(maxsize=None)
def multi_indices(dim: int, k: int) -> tuple:
    return tuple(itertools.combinations(range(dim), k))


@lru_cache(maxsize=None)
def _position(dim: int, k: int) -> dict:
    return {idx: n for n, idx in enumerate(multi_indices(dim, k))}


@lru_cache(maxsize=None)
def _interior_table(dim: int, k: int):
    """Sparse table for (i_v a)_J = sum_i sign * v_i * a_{sorted(i+J)}, J of length k-1."""
    rows, cols, var, sign = [], [], [], []
    pos_k = _position(dim, k)
    for r, J in enumerate(multi_indices(dim, k - 1)):
        for i in range(dim):
            if i in J:
                continue
            I = tuple(sorted(J + (i,)))
            rows.append(r)
            cols.append(pos_k[I])
            var.append(i)
            sign.append(-1.0 if I.index(i) % 2 else 1.0)
    return (np.array(rows, dtype=int), np.array(cols, dtype=int),
            np.array(var, dtype=int), np.array(sign))


@lru_cache(maxsize=None)
def _exterior_table(dim: int, k: int):
    """Sparse table for (d a)_{I'} = sum_j (-1)^j d_{i_j} a_{I' minus i_j}."""
    rows, cols, var, sign = [], [], [], []
    pos_k = _position(dim, k)
    for r, Ip in enumerate(multi_indices(dim, k + 1)):
        for j, i in enumerate(Ip):
            rows.append(r)
            cols.append(pos_k[Ip[:j] + Ip[j + 1:]])
            var.append(i)
            sign.append(-1.0 if j % 2 else 1.0)
    return (np.array(rows, dtype=int), np.array(cols, dtype=int),
            np.array(var, dtype=int), np.array(sign))


@lru_cache(maxsize=None)
def _upper(dim: int):
    return np.triu_indices(dim, 1)


def _perm_sign(seq) -> float:
    seq = list(seq)
    sign = 1.0
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


# ------------------------------------------------------------ FormValue

class FormValue:
    """A k-form evaluated at one point: coefficients over increasing multi-indices."""

    __slots__ = ("dim", "degree", "coeffs")

    def __init__(self, dim: int, degree: int, coeffs=None):
        if not 0 <= degree:
            raise DegreeError(f"negative degree {degree}")
        self.dim = dim
        self.degree = degree
        n = len(multi_indices(dim, degree))
        if coeffs is None:
            coeffs = np.zeros(n)
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (n,):
            raise ValueError(f"expected {n} coefficients for a {degree}-form in dim {dim}")
        self.coeffs = coeffs

    @classmethod
    def from_dict(cls, dim: int, degree: int, table: Mapping[tuple, float]) -> "FormValue":
        out = np.zeros(len(multi_indices(dim, degree)))
        pos = _position(dim, degree)
        for idx, value in table.items():
            if len(set(idx)) < len(idx):
                continue
            out[pos[tuple(sorted(idx))]] += _perm_sign(idx) * value
        return cls(dim, degree, out)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "FormValue":
        m = np.asarray(m, dtype=float)
        return cls(m.shape[0], 2, m[_upper(m.shape[0])])

    def __repr__(self):
        return f"FormValue(dim={self.dim}, degree={self.degree}, {self.to_dict()})"

    def to_dict(self) -> dict:
        return {idx: float(c) for idx, c in zip(multi_indices(self.dim, self.degree), self.coeffs)}

    def __getitem__(self, idx) -> float:
        idx = tuple(idx)
        if len(idx) != self.degree:
            raise IndexError("multi-index length must equal the degree")
        if len(set(idx)) < len(idx):
            return 0.0
        return _perm_sign(idx) * self.coeffs[_position(self.dim, self.degree)[tuple(sorted(idx))]]

    def _same_shape(self, other):
        if (self.dim, self.degree) != (other.dim, other.degree):
            raise DegreeError("forms of different degree or dimension")

    def __add__(self, other):
        self._same_shape(other)
        return FormValue(self.dim, self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other):
        self._same_shape(other)
        return FormValue(self.dim, self.degree, self.coeffs - other.coeffs)

    def __neg__(self):
        return FormValue(self.dim, self.degree, -self.coeffs)

    def __mul__(self, s: float):
        return FormValue(self.dim, self.degree, self.coeffs * s)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def matrix(self) -> np.ndarray:
        """Dense antisymmetric matrix of a 2-form: M[i, j] = a(e_i, e_j)."""
        if self.degree != 2:
            raise DegreeError("matrix() needs a 2-form")
        m = np.zeros((self.dim, self.dim))
        m[_upper(self.dim)] = self.coeffs
        return m - m.T

    def dense(self) -> np.ndarray:
        """Fully antisymmetric tensor with dim**degree entries."""
        t = np.zeros((self.dim,) * self.degree)
        for idx, c in zip(multi_indices(self.dim, self.degree), self.coeffs):
            if c == 0.0:
                continue
            for perm in itertools.permutations(range(self.degree)):
                t[tuple(idx[p] for p in perm)] = _perm_sign(perm) * c
        return t

    @classmethod
    def from_dense(cls, t: np.ndarray) -> "FormValue":
        dim = t.shape[0] if t.ndim else 0
        k = t.ndim
        if k == 0:
            return cls(0, 0, np.array([float(t)]))
        return cls(dim, k, np.array([t[idx] for idx in multi_indices(dim, k)]))

    def evaluate(self, *vectors) -> float:
        if len(vectors) != self.degree:
            raise DegreeError(f"{self.degree}-form needs {self.degree} vectors")
        if self.degree == 0:
            return float(self.coeffs[0])
        V = np.column_stack([np.asarray(v, dtype=float) for v in vectors])
        for i in range(self.degree):
            for j in range(i + 1, self.degree):
                if np.array_equal(V[:, i], V[:, j]):
                    return 0.0
        total = 0.0
        for idx, c in zip(multi_indices(self.dim, self.degree), self.coeffs):
            if c != 0.0:
                total += c * np.linalg.det(V[list(idx), :])
        return float(total)

    def interior(self, v) -> "FormValue":
        if self.degree == 0:
            raise DegreeError("interior product of a 0-form")
        rows, cols, var, sign = _interior_table(self.dim, self.degree)
        out = np.zeros(len(multi_indices(self.dim, self.degree - 1)))
        np.add.at(out, rows, sign * np.asarray(v, dtype=float)[var] * self.coeffs[cols])
        return FormValue(self.dim, self.degree - 1, out)

    def wedge(self, other: "FormValue") -> "FormValue":
        if self.dim != other.dim:
            raise DegreeError("wedge of forms on different dimensions")
        k = self.degree + other.degree
        if k > self.dim:
            raise DegreeError(f"wedge degree {k} exceeds dimension {self.dim}")
        out = np.zeros(len(multi_indices(self.dim, k)))
        pos = _position(self.dim, k)
        for I, a in zip(multi_indices(self.dim, self.degree), self.coeffs):
            if a == 0.0:
                continue
            for J, b in zip(multi_indices(other.dim, other.degree), other.coeffs):
                if b == 0.0 or set(I) & set(J):
                    continue
                merged = I + J
                out[pos[tuple(sorted(merged))]] += _perm_sign(merged) * a * b
        return FormValue(self.dim, k, out)

    def pullback(self, jac: np.ndarray) -> "FormValue":
        """Pull back along a map whose Jacobian (target x source) is ``jac``."""
        jac = np.asarray(jac, dtype=float)
        if jac.shape[0] != self.dim:
            raise DegreeError("Jacobian rows must match the form's dimension")
        n = jac.shape[1]
        k = self.degree
        if k == 0:
            return FormValue(n, 0, self.coeffs.copy())
        if k == 1:
            return FormValue(n, 1, jac.T @ self.coeffs)
        if k == 2:
            if n < 2:
                return FormValue(n, 2)
            return FormValue.from_matrix(jac.T @ self.matrix() @ jac)
        out = np.zeros(len(multi_indices(n, k)))
        for r, I in enumerate(multi_indices(n, k)):
            sub = jac[:, list(I)]
            out[r] = sum(c * np.linalg.det(sub[list(J), :])
                         for J, c in zip(multi_indices(self.dim, k), self.coeffs) if c != 0.0)
        return FormValue(n, k, out)


def d_from_jets(dim: int, degree: int, grads: np.ndarray) -> FormValue:
    """Exterior derivative from coefficient gradients ``grads[I, m] = d_m a_I``."""
    if degree >= dim:
        return _empty(dim, degree + 1)
    rows, cols, var, sign = _exterior_table(dim, degree)
    out = np.zeros(len(multi_indices(dim, degree + 1)))
    np.add.at(out, rows, sign * grads[cols, var])
    return FormValue(dim, degree + 1, out)


def _empty(dim, degree):
    f = FormValue.__new__(FormValue)
    f.dim, f.degree, f.coeffs = dim, degree, np.zeros(0)
    return f


# ----------------------------------------------------------------- Chart

@dataclass(frozen=True)
class Chart:
    name: str
    coords: tuple
    domain: tuple = ()
    singular_guard: float = DEFAULT_SINGULAR_GUARD

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "domain", tuple(
            parse(d) if isinstance(d, str) else d for d in self.domain))
        if len(set(self.coords)) != len(self.coords):
            raise ValueError(f"chart {self.name!r} has repeated coordinates")
        if not self.coords:
            raise ValueError(f"chart {self.name!r} has no coordinates")
        for d in self.domain:
            extra = d.variables - set(self.coords)
            if extra:
                raise ValueError(f"domain constraint of chart {self.name!r} uses unknown "
                                 f"coordinate {sorted(extra)[0]!r}")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def point(self, values) -> np.ndarray:
        if isinstance(values, Mapping):
            missing = [c for c in self.coords if c not in values]
            if missing:
                raise KeyError(f"point is missing coordinate {missing[0]!r} of chart {self.name!r}")
            return np.array([float(values[c]) for c in self.coords])
        x = np.asarray(values, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"chart {self.name!r} expects {self.dim} coordinates")
        return x

    def as_dict(self, x) -> dict:
        return {c: float(v) for c, v in zip(self.coords, x)}

    def contains(self, x) -> bool:
        x = tuple(float(v) for v in x)
        try:
            return all(d.compiled(self.coords, 0, self.singular_guard)(x) > 0 for d in self.domain)
        except EvaluationError:
            return False

    def expression(self, source) -> Expression:
        e = parse(source) if isinstance(source, str) else source
        extra = e.variables - set(self.coords)
        if extra:
            raise ValueError(f"expression {e.source!r} uses coordinate {sorted(extra)[0]!r} "
                             f"unknown to chart {self.name!r}")
        return e


# --------------------------------------------------------- vector fields

def _fd_jacobian(fn: Callable, x: np.ndarray, step: float = 1e-6):
    x = np.asarray(x, dtype=float)
    v0 = np.asarray(fn(x))
    D = np.zeros((v0.size, x.size))
    for m in range(x.size):
        h = step * max(1.0, abs(x[m]))
        e = np.zeros_like(x)
        e[m] = h
        D[:, m] = (np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h)
    return v0, D


class VectorFieldBase:
    chart: Chart

    def __call__(self, x) -> np.ndarray:
        raise NotImplementedError

    def jacobian(self, x):
        """(value, D) with D[i, m] = d_m X^i.  Central differences unless overridden."""
        return _fd_jacobian(self, x)


class VectorField(VectorFieldBase):
    """Expression-backed vector field; one component per chart coordinate."""

    def __init__(self, chart: Chart, components: Sequence):
        if len(components) != chart.dim:
            raise ValueError(f"vector field on {chart.name!r} needs {chart.dim} components")
        self.chart = chart
        self.components = tuple(chart.expression(c) for c in components)

    @classmethod
    def from_mapping(cls, chart: Chart, table: Mapping[str, str]) -> "VectorField":
        unknown = set(table) - set(chart.coords)
        if unknown:
            raise ValueError(f"unknown coordinate {sorted(unknown)[0]!r} for chart {chart.name!r}")
        return cls(chart, [table.get(c, "0") for c in chart.coords])

    def __call__(self, x):
        x = tuple(float(v) for v in x)
        g = self.chart.singular_guard
        return np.array([c.compiled(self.chart.coords, 0, g)(x) for c in self.components])

    def jacobian(self, x):
        x = tuple(float(v) for v in x)
        g = self.chart.singular_guard
        jets = [c.compiled(self.chart.coords, 1, g)(x) for c in self.components]
        return np.array([j.value for j in jets]), np.array([j.gradient for j in jets])


class SolvedField(VectorFieldBase):
    """Vector field defined point-wise by a callable (linear solves, lifts)."""

    def __init__(self, chart: Chart, fn: Callable, name: str = ""):
        self.chart = chart
        self.fn = fn
        self.name = name

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)


class ScaledField(VectorFieldBase):
    def __init__(self, field: VectorFieldBase, scale: float):
        self.chart = field.chart
        self.field = field
        self.scale = scale

    def __call__(self, x):
        return self.scale * self.field(x)

    def jacobian(self, x):
        v, D = self.field.jacobian(x)
        return self.scale * v, self.scale * D


class LinearCombinationField(VectorFieldBase):
    def __init__(self, fields: Sequence[VectorFieldBase], weights: Sequence[float]):
        self.chart = fields[0].chart
        self.fields = tuple(fields)
        self.weights = np.asarray(weights, dtype=float)

    def __call__(self, x):
        return sum(w * f(x) for w, f in zip(self.weights, self.fields))

    def jacobian(self, x):
        parts = [f.jacobian(x) for f in self.fields]
        return (sum(w * p[0] for w, p in zip(self.weights, parts)),
                sum(w * p[1] for w, p in zip(self.weights, parts)))


# ------------------------------------------------------------ smooth maps

class MapBase:
    source: Chart
    target: Chart

    def __call__(self, x) -> np.ndarray:
        return self.jacobian(x)[0]

    def jacobian(self, x):
        raise NotImplementedError

    def hessian(self, x):
        """(value, J, H) with H[a, i, m] = d_i d_m F^a."""
        raise NotImplementedError


class SmoothMap(MapBase):
    def __init__(self, source: Chart, target: Chart, components: Sequence):
        if len(components) != target.dim:
            raise ValueError(f"map {source.name}->{target.name} needs {target.dim} components")
        self.source = source
        self.target = target
        self.components = tuple(source.expression(c) for c in components)
        self._fns: dict = {}

    @classmethod
    def from_mapping(cls, source: Chart, target: Chart, table: Mapping[str, str]) -> "SmoothMap":
        unknown = set(table) - set(target.coords)
        if unknown:
            raise ValueError(f"unknown target coordinate {sorted(unknown)[0]!r} "
                             f"for chart {target.name!r}")
        missing = [c for c in target.coords if c not in table]
        if missing:
            raise ValueError(f"map {source.name}->{target.name} lacks component {missing[0]!r}")
        return cls(source, target, [table[c] for c in target.coords])

    @classmethod
    def identity(cls, chart: Chart, target: Chart | None = None) -> "SmoothMap":
        return cls(chart, target or chart, list(chart.coords))

    def _eval(self, x, order):
        fns = self._fns.get(order)
        if fns is None:
            g = self.source.singular_guard
            fns = self._fns[order] = [c.compiled(self.source.coords, order, g)
                                      for c in self.components]
        x = tuple(float(v) for v in x)
        return [f(x) for f in fns]

    def __call__(self, x):
        return np.array(self._eval(x, 0))

    def jacobian(self, x):
        jets = self._eval(x, 1)
        return np.array([j.value for j in jets]), np.array([j.gradient for j in jets])

    def hessian(self, x):
        jets = self._eval(x, 2)
        return (np.array([j.value for j in jets]), np.array([j.gradient for j in jets]),
                np.array([j.hessian for j in jets]))


class ComposedMap(MapBase):
    """outer o inner, differentiated by the chain rule."""

    def __init__(self, outer: MapBase, inner: MapBase):
        if inner.target.dim != outer.source.dim:
            raise ValueError(f"cannot compose {outer.source.name} after {inner.target.name}")
        self.outer = outer
        self.inner = inner
        self.source = inner.source
        self.target = outer.target

    def __call__(self, x):
        return self.outer(self.inner(x))

    def jacobian(self, x):
        y, J1 = self.inner.jacobian(x)
        z, J2 = self.outer.jacobian(y)
        return z, J2 @ J1

    def hessian(self, x):
        y, J1, H1 = self.inner.hessian(x)
        z, J2, H2 = self.outer.hessian(y)
        H = np.einsum("abc,bi,cm->aim", H2, J1, J1) + np.einsum("ab,bim->aim", J2, H1)
        return z, J2 @ J1, H


def compose(*maps: MapBase) -> MapBase:
    """compose(f, g, h) = f o g o h."""
    out = maps[-1]
    for m in reversed(maps[:-1]):
        out = ComposedMap(m, out)
    return out


class LiftedVectorField(VectorFieldBase):
    """Field on an embedded chart solving dF(x) v = X(F(x)) in the least-squares sense."""

    def __init__(self, embedding: MapBase, ambient: VectorFieldBase):
        self.embedding = embedding
        self.ambient = ambient
        self.chart = embedding.source

    def solve(self, x):
        y, J = self.embedding.jacobian(x)
        target = self.ambient(y)
        v, *_ = np.linalg.lstsq(J, target, rcond=None)
        return v, float(np.max(np.abs(J @ v - target))) if target.size else 0.0

    def __call__(self, x):
        return self.solve(x)[0]

    def residual(self, x) -> float:
        return self.solve(x)[1]

    def jacobian(self, x):
        y, J, H = self.embedding.hessian(x)
        Y, DY = self.ambient.jacobian(y)
        A = J.T @ J
        v = np.linalg.solve(A, J.T @ Y)
        n = J.shape[1]
        D = np.zeros((n, n))
        for m in range(n):
            dJ = H[:, :, m]
            dY = DY @ J[:, m]
            db = dJ.T @ Y + J.T @ dY
            dA = dJ.T @ J + J.T @ dJ
            D[:, m] = np.linalg.solve(A, db - dA @ v)
        return v, D


# ------------------------------------------------------------ form fields

class FormField:
    chart: Chart
    degree: int

    def at(self, x) -> FormValue:
        raise NotImplementedError

    def jets(self, x):
        """(value, grads) with grads[I, m] = d_m of coefficient I."""
        raise NotImplementedError

    def d_at(self, x) -> FormValue:
        _, grads = self.jets(x)
        return d_from_jets(self.chart.dim, self.degree, grads)


class KForm(FormField):
    """Expression-backed k-form."""

    def __init__(self, chart: Chart, degree: int, coefficients: Mapping[tuple, object]):
        if not 0 <= degree <= chart.dim:
            raise DegreeError(f"degree {degree} invalid on a {chart.dim}-dimensional chart")
        self.chart = chart
        self.degree = degree
        pos = _position(chart.dim, degree)
        slots: list = [None] * len(pos)
        for idx, src in coefficients.items():
            idx = tuple(idx)
            if len(idx) != degree:
                raise DegreeError(f"multi-index {idx} does not match degree {degree}")
            if list(idx) != sorted(set(idx)):
                raise ValueError(f"multi-index {idx} must be strictly increasing")
            slots[pos[idx]] = chart.expression(src)
        self._exprs = tuple(slots)
        self._fns: dict = {}

    @classmethod
    def one_form(cls, chart: Chart, table: Mapping[str, str]) -> "KForm":
        unknown = set(table) - set(chart.coords)
        if unknown:
            raise ValueError(f"unknown coordinate {sorted(unknown)[0]!r} for chart {chart.name!r}")
        index = {c: i for i, c in enumerate(chart.coords)}
        return cls(chart, 1, {(index[c],): src for c, src in table.items()})

    @classmethod
    def scalar(cls, chart: Chart, source) -> "KForm":
        return cls(chart, 0, {(): source})

    @property
    def coefficients(self) -> dict:
        return {idx: e for idx, e in zip(multi_indices(self.chart.dim, self.degree), self._exprs)
                if e is not None}

    def _compiled(self, order: int) -> list:
        fns = self._fns.get(order)
        if fns is None:
            coords, g = self.chart.coords, self.chart.singular_guard
            fns = [(r, e.compiled(coords, order, g)) for r, e in enumerate(self._exprs)
                   if e is not None]
            self._fns[order] = fns
        return fns

    def at(self, x):
        x = tuple(float(v) for v in x)
        out = np.zeros(len(self._exprs))
        for r, fn in self._compiled(0):
            out[r] = fn(x)
        return FormValue(self.chart.dim, self.degree, out)

    def jets(self, x):
        x = tuple(float(v) for v in x)
        n = self.chart.dim
        vals = np.zeros(len(self._exprs))
        grads = np.zeros((len(self._exprs), n))
        for r, fn in self._compiled(1):
            j = fn(x)
            vals[r] = j.value
            grads[r] = j.gradient
        return FormValue(n, self.degree, vals), grads


def _pull_dense(T: np.ndarray, A: np.ndarray) -> np.ndarray:
    for _ in range(T.ndim):
        # contract the leading slot, append the new one at the end
        T = np.tensordot(T, A, axes=([0], [0]))
    return T


class PullbackForm(FormField):
    """F^* a for a map F and a form field a on F's target."""

    def __init__(self, map: MapBase, form: FormField):
        if map.target.dim != form.chart.dim:
            raise ValueError(f"map target {map.target.name!r} does not match form chart "
                             f"{form.chart.name!r}")
        self.map = map
        self.form = form
        self.chart = map.source
        self.degree = form.degree

    def at(self, x):
        y, J = self.map.jacobian(x)
        return self.form.at(y).pullback(J)

    def d_at(self, x):
        # naturality: d(F^* a) = F^*(d a), only first derivatives of F needed
        y, J = self.map.jacobian(x)
        da = self.form.d_at(y)
        if da.degree > self.chart.dim:
            return _empty(self.chart.dim, da.degree)
        return da.pullback(J)

    def jets(self, x):
        y, J, H = self.map.hessian(x)
        val, G = self.form.jets(y)
        n = self.chart.dim
        k = self.degree
        value = val.pullback(J)
        if k == 0:
            return value, (G @ J).reshape(1, n)
        T = val.dense()
        grads = np.zeros((len(multi_indices(n, k)), n))
        for m in range(n):
            # target coefficients differentiated along d_m through the map
            dT = FormValue(val.dim, k, G @ J[:, m]).dense()
            total = _pull_dense(dT, J)
            for slot in range(k):
                mats = [J] * k
                mats[slot] = H[:, :, m]
                S = T
                for A in mats:
                    S = np.tensordot(S, A, axes=([0], [0]))
                total = total + S
            grads[:, m] = [total[idx] for idx in multi_indices(n, k)]
        return value, grads


class FormSum(FormField):
    def __init__(self, *forms: FormField, weights: Sequence[float] | None = None):
        self.forms = forms
        self.weights = tuple(weights) if weights is not None else (1.0,) * len(forms)
        self.chart = forms[0].chart
        self.degree = forms[0].degree
        if any(f.degree != self.degree or f.chart.dim != self.chart.dim for f in forms):
            raise DegreeError("summands must share chart dimension and degree")

    def at(self, x):
        return _weighted([f.at(x) for f in self.forms], self.weights)

    def d_at(self, x):
        return _weighted([f.d_at(x) for f in self.forms], self.weights)

    def jets(self, x):
        parts = [f.jets(x) for f in self.forms]
        return (_weighted([p[0] for p in parts], self.weights),
                sum(w * p[1] for w, p in zip(self.weights, parts)))


def _weighted(values, weights):
    out = values[0] * weights[0]
    for v, w in zip(values[1:], weights[1:]):
        out = out + v * w
    return out


# ------------------------------------------------------------- operations

def exterior_derivative(form: FormField, x) -> FormValue:
    if form.degree >= form.chart.dim:
        raise DegreeError(f"d of a {form.degree}-form on a {form.chart.dim}-dimensional chart")
    return form.d_at(x)


def interior_product(field: VectorFieldBase, form: FormField, x) -> FormValue:
    if form.degree < 1:
        raise DegreeError("interior product needs degree >= 1")
    return form.at(x).interior(field(x))


def wedge(a: FormField, b: FormField, x) -> FormValue:
    if a.degree + b.degree > a.chart.dim:
        raise DegreeError("wedge degree exceeds chart dimension")
    return a.at(x).wedge(b.at(x))


def lie_derivative(field: VectorFieldBase, form: FormField, x) -> FormValue:
    """Cartan's formula: L_X a = i_X da + d(i_X a)."""
    x = np.asarray(x, dtype=float)
    n = form.chart.dim
    k = form.degree
    v, DV = field.jacobian(x)
    if k == 0:
        return FormValue(n, 0, [form.d_at(x).coeffs @ v])
    val, G = form.jets(x)
    # gradients of the coefficients of i_X a
    grads = np.zeros((len(multi_indices(n, k - 1)), n))
    for m in range(n):
        grads[:, m] = val.interior(DV[:, m]).coeffs + FormValue(n, k, G[:, m]).interior(v).coeffs
    second = d_from_jets(n, k - 1, grads)
    if k == n:
        return second
    first = d_from_jets(n, k, G).interior(v)
    return first + second


def pullback(map: MapBase, form: FormField, x) -> FormValue:
    return PullbackForm(map, form).at(x)


def pushforward_vector(map: MapBase, field, x) -> np.ndarray:
    _, J = map.jacobian(x)
    v = field(x) if callable(field) else np.asarray(field, dtype=float)
    return J @ v


def bracket(X: VectorFieldBase, Y: VectorFieldBase, x) -> np.ndarray:
    """Vector field commutator [X, Y]^k = X^i d_i Y^k - Y^i d_i X^k."""
    vx, DX = X.jacobian(x)
    vy, DY = Y.jacobian(x)
    return DY @ vx - DX @ vy


def top_wedge_volume(eta: FormValue, deta: FormValue) -> float:
    """eta ^ (d eta)^(n-1) on a (2n-1)-dimensional space, evaluated on the coordinate basis."""
    dim = eta.dim
    if dim % 2 == 0:
        raise DegreeError("contact volume needs odd dimension")
    vol = eta
    for _ in range((dim - 1) // 2):
        vol = vol.wedge(deta)
    return float(vol.coeffs[0])


def angle_between(u, v) -> float:
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        return math.pi / 2
    # angle between lines, robust for tiny angles
    cross = np.linalg.norm(np.outer(u, v) - np.outer(v, u)) / math.sqrt(2)
    return float(math.atan2(cross, abs(float(u @ v))))
