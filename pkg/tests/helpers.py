"""Shared strategies and independent oracles for the test suite."""

import itertools
import math

import numpy as np
from hypothesis import strategies as st

from exactred.expr import eval_jet
from exactred.geometry import FormValue, KForm, d_from_jets, multi_indices


def _monomial(coords):
    return st.tuples(
        st.integers(-3, 3).filter(lambda c: c != 0),
        st.lists(st.tuples(st.sampled_from(coords), st.integers(1, 2)), max_size=2),
    ).map(lambda t: " * ".join([str(t[0])] + [f"{v}^{p}" for v, p in t[1]]))


def polynomial(coords):
    """Small polynomial in ``coords`` as expression text."""
    return st.lists(_monomial(coords), min_size=1, max_size=3).map(lambda ms: " + ".join(ms))


def smooth_coefficient(coords):
    return st.one_of(polynomial(coords),
                     st.tuples(st.sampled_from(["sin", "cos"]), polynomial(coords))
                     .map(lambda t: f"{t[0]}({t[1]})"))


def random_form(chart, degree):
    """A k-form whose coefficients are random smooth expressions on ``chart``."""
    idx = multi_indices(chart.dim, degree)
    return st.lists(st.one_of(st.none(), smooth_coefficient(chart.coords)),
                    min_size=len(idx), max_size=len(idx)).map(
        lambda cs: KForm(chart, degree, {i: c for i, c in zip(idx, cs) if c is not None}))


def points(dim, lo=-1.5, hi=1.5):
    return st.lists(st.floats(min_value=lo, max_value=hi, allow_nan=False),
                    min_size=dim, max_size=dim).map(np.array)


def vectors(dim):
    return points(dim, -2.0, 2.0)


def perm_sign(p):
    p = list(p)
    sign = 1
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


def dense_alt(t):
    """Antisymmetrization of a dense tensor."""
    k = t.ndim
    out = np.zeros_like(t)
    for p in itertools.permutations(range(k)):
        out = out + perm_sign(p) * np.transpose(t, p)
    return out / math.factorial(k)


def dense_wedge(a: FormValue, b: FormValue) -> np.ndarray:
    """(k+l)!/(k! l!) Alt(a (x) b), the textbook definition."""
    k, l = a.degree, b.degree
    t = np.multiply.outer(a.dense(), b.dense())
    return math.factorial(k + l) / (math.factorial(k) * math.factorial(l)) * dense_alt(t)


def d_dense(form: KForm, x) -> np.ndarray:
    """d a as a dense tensor: sum over m, I of (d_m a_I) dx^m ^ dx^I via the wedge definition."""
    chart = form.chart
    n, k = chart.dim, form.degree
    point = chart.as_dict(x)
    out = np.zeros((n,) * (k + 1))
    for idx, e in form.coefficients.items():
        grad = eval_jet(e, point, 1, variables=chart.coords).gradient
        basis = FormValue.from_dict(n, k, {idx: 1.0})
        for m in range(n):
            dxm = FormValue.from_dict(n, 1, {(m,): 1.0})
            out = out + grad[m] * dense_wedge(dxm, basis)
    return out


def d_twice(form: KForm, x) -> FormValue:
    """d(d a) through the engine's d table twice, using exact coefficient Hessians."""
    chart = form.chart
    n, k = chart.dim, form.degree
    point = chart.as_dict(x)
    H = np.zeros((len(multi_indices(n, k)), n, n))
    for r, idx in enumerate(multi_indices(n, k)):
        e = form.coefficients.get(idx)
        if e is not None:
            H[r] = eval_jet(e, point, 2, variables=chart.coords).hessian
    # d_m (d a) = d applied to the coefficient gradients differentiated along m
    grads = np.stack([d_from_jets(n, k, H[:, :, m]).coeffs for m in range(n)], axis=1)
    return d_from_jets(n, k + 1, grads)
