"""Expression language with first- and second-order forward-mode differentiation.

Grammar (closed, no user functions)::

    expr    := term (('+' | '-') term)*
    term    := unary (('*' | '/') unary)*
    unary   := ('-' | '+') unary | power
    power   := atom ('^' unary)?          # right-associative
    atom    := NUMBER | NAME | NAME '(' expr (',' expr)* ')' | '(' expr ')'

``pi`` is the only named constant.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

DEFAULT_SINGULAR_GUARD = 1e-8

FUNCTIONS = {
    "sqrt": 1,
    "sin": 1,
    "cos": 1,
    "tan": 1,
    "exp": 1,
    "log": 1,
    "abs": 1,
    "sgn": 1,
    "min": 2,
    "max": 2,
}


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError):
    def __init__(self, message: str, offset: int, expected: Sequence[str] = ()):
        self.offset = offset
        self.expected = tuple(sorted(set(expected)))
        detail = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class EvaluationError(ExprError):
    pass


class UnassignedVariable(EvaluationError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"variable {name!r} is not assigned")


class PoleError(EvaluationError):
    pass


class SingularPointError(EvaluationError):
    """Raised when a point lies within the singular guard of an abs/sgn/min/max kink."""


# ---------------------------------------------------------------- AST

class Node:
    __slots__ = ()


@dataclass(frozen=True)
class Const(Node):
    value: float


@dataclass(frozen=True)
class Var(Node):
    name: str


@dataclass(frozen=True)
class Neg(Node):
    arg: Node


@dataclass(frozen=True)
class Add(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Sub(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Mul(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Div(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Pow(Node):
    left: Node
    right: Node


@dataclass(frozen=True)
class Call(Node):
    func: str
    args: tuple


_BINARY = {"+": Add, "-": Sub, "*": Mul, "/": Div, "^": Pow}
_SYMBOL = {cls: sym for sym, cls in _BINARY.items()}


def variables_of(node: Node) -> frozenset:
    if isinstance(node, Var):
        return frozenset([node.name])
    if isinstance(node, Const):
        return frozenset()
    if isinstance(node, Neg):
        return variables_of(node.arg)
    if isinstance(node, Call):
        out = frozenset()
        for a in node.args:
            out |= variables_of(a)
        return out
    return variables_of(node.left) | variables_of(node.right)


def to_source(node: Node) -> str:
    """Fully parenthesized text that re-parses to the same tree."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{to_source(node.arg)})"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(to_source(a) for a in node.args)})"
    return f"({to_source(node.left)} {_SYMBOL[type(node)]} {to_source(node.right)})"


# ------------------------------------------------------------- parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos))
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


def _byte_offset(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, source: str):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok, expected=()):
        raise ExprSyntaxError(message, _byte_offset(self.source, tok[2]), expected)

    def expect(self, text):
        tok = self.peek()
        if tok[1] != text or tok[0] == "num":
            what = "end of input" if tok[0] == "end" else repr(tok[1])
            if text == ")":
                self.fail(f"unbalanced parentheses: found {what}", tok, [")", "operator"])
            self.fail(f"found {what}", tok, [text])
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            if tok[1] == ")":
                self.fail("unbalanced parentheses: unexpected ')'", tok, ["operator", "end of input"])
            self.fail(f"unexpected token {tok[1]!r}", tok, ["operator", "end of input"])
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = _BINARY[op](node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = _BINARY[op](node, self.unary())
        return node

    def unary(self) -> Node:
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Neg(self.unary())
        if tok[0] == "op" and tok[1] == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek()[0] == "op" and self.peek()[1] == "^":
            self.advance()
            return Pow(base, self.unary())
        return base

    def atom(self) -> Node:
        tok = self.peek()
        atom_start = ["number", "name", "(", "-"]
        if tok[0] == "num":
            self.advance()
            return Const(float(tok[1]))
        if tok[0] == "name":
            self.advance()
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if tok[1] not in FUNCTIONS:
                    self.fail(f"unknown function {tok[1]!r}", tok, sorted(FUNCTIONS))
                self.advance()
                args = [self.expr()]
                while self.peek()[1] == "," and self.peek()[0] == "op":
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                arity = FUNCTIONS[tok[1]]
                if len(args) != arity:
                    self.fail(f"{tok[1]} takes {arity} argument(s), got {len(args)}", tok)
                return Call(tok[1], tuple(args))
            if tok[1] == "pi":
                return Const(math.pi)
            return Var(tok[1])
        if tok[0] == "op" and tok[1] == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if tok[0] == "end" else repr(tok[1])
        self.fail(f"found {what}", tok, atom_start)


def parse(source: str) -> "Expression":
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 0, ["number", "name", "(", "-"])
    return Expression(_Parser(source).parse(), source)


# --------------------------------------------------------------- jets

class Jet2:
    """Value, gradient and (optionally) Hessian of a scalar w.r.t. active variables."""

    __slots__ = ("value", "gradient", "hessian")

    def __init__(self, value: float, gradient: np.ndarray, hessian: np.ndarray | None = None):
        self.value = value
        self.gradient = gradient
        self.hessian = hessian

    def __repr__(self):
        return f"Jet2(value={self.value!r}, gradient={self.gradient!r}, hessian={self.hessian!r})"


def _jadd(a, b):
    h = None if a.hessian is None else a.hessian + b.hessian
    return Jet2(a.value + b.value, a.gradient + b.gradient, h)


def _jsub(a, b):
    h = None if a.hessian is None else a.hessian - b.hessian
    return Jet2(a.value - b.value, a.gradient - b.gradient, h)


def _jmul(a, b):
    g = a.value * b.gradient + b.value * a.gradient
    h = None
    if a.hessian is not None:
        o = np.outer(a.gradient, b.gradient)
        h = a.value * b.hessian + b.value * a.hessian + o + o.T
    return Jet2(a.value * b.value, g, h)


def _jscale(a, s):
    return Jet2(a.value * s, a.gradient * s, None if a.hessian is None else a.hessian * s)


def _jshift(a, s):
    return Jet2(a.value + s, a.gradient, a.hessian)


def _chain(u, f0, f1, f2):
    h = None
    if u.hessian is not None:
        h = f1 * u.hessian
        if f2 != 0.0:
            h = h + f2 * np.outer(u.gradient, u.gradient)
    return Jet2(f0, f1 * u.gradient, h)


def _guard_kink(u: float, guard: float, what: str):
    if abs(u) <= guard:
        raise SingularPointError(f"{what} evaluated within {guard:g} of its kink (argument {u!r})")


def _recip_derivs(u):
    if u == 0.0:
        raise PoleError("division by zero")
    r = 1.0 / u
    return r, -r * r, 2.0 * r * r * r


def _pow_derivs(u, c, order):
    if u == 0.0 and (c < 0 or (order >= 1 and 0 < c < 1) or (order >= 2 and 1 < c < 2)):
        raise PoleError(f"0 raised to {c!r} is not differentiable to order {order}")
    if u < 0 and not float(c).is_integer():
        raise PoleError(f"negative base {u!r} raised to non-integer power {c!r}")
    f0 = u ** c
    f1 = c * u ** (c - 1) if order >= 1 and c != 0 else 0.0
    f2 = c * (c - 1) * u ** (c - 2) if order >= 2 and c * (c - 1) != 0 else 0.0
    return f0, f1, f2


def _unary_derivs(func, u, order, guard):
    if func == "sqrt":
        if u < 0 or (u == 0 and order >= 1):
            raise PoleError(f"sqrt of {u!r}")
        s = math.sqrt(u)
        if order == 0:
            return s, 0.0, 0.0
        return s, 0.5 / s, -0.25 / (s * u)
    if func == "sin":
        s, c = math.sin(u), math.cos(u)
        return s, c, -s
    if func == "cos":
        s, c = math.sin(u), math.cos(u)
        return c, -s, -c
    if func == "tan":
        c = math.cos(u)
        if c == 0.0:
            raise PoleError("tan at a pole")
        t = math.tan(u)
        sec2 = 1.0 + t * t
        return t, sec2, 2.0 * t * sec2
    if func == "exp":
        e = math.exp(u)
        return e, e, e
    if func == "log":
        if u <= 0:
            raise PoleError(f"log of non-positive value {u!r}")
        return math.log(u), 1.0 / u, -1.0 / (u * u)
    if func == "abs":
        _guard_kink(u, guard, "abs")
        s = 1.0 if u > 0 else -1.0
        return abs(u), s, 0.0
    if func == "sgn":
        _guard_kink(u, guard, "sgn")
        return (1.0 if u > 0 else -1.0), 0.0, 0.0
    raise ExprError(f"unknown function {func!r}")


# ----------------------------------------------------------- compiler

def _compile_float(node: Node, index: Mapping[str, int], guard: float) -> Callable:
    if isinstance(node, Const):
        v = float(node.value)
        return lambda x: v
    if isinstance(node, Var):
        if node.name not in index:
            raise UnassignedVariable(node.name)
        i = index[node.name]
        return lambda x: x[i]
    if isinstance(node, Neg):
        a = _compile_float(node.arg, index, guard)
        return lambda x: -a(x)
    if isinstance(node, Call):
        fs = [_compile_float(a, index, guard) for a in node.args]
        if node.func in ("min", "max"):
            a, b = fs
            pick = min if node.func == "min" else max

            def minmax(x):
                u, v = a(x), b(x)
                _guard_kink(u - v, guard, node.func)
                return pick(u, v)

            return minmax
        a = fs[0]
        func = node.func
        return lambda x: _unary_derivs(func, a(x), 0, guard)[0]
    a = _compile_float(node.left, index, guard)
    b = _compile_float(node.right, index, guard)
    if isinstance(node, Add):
        return lambda x: a(x) + b(x)
    if isinstance(node, Sub):
        return lambda x: a(x) - b(x)
    if isinstance(node, Mul):
        return lambda x: a(x) * b(x)
    if isinstance(node, Div):
        def div(x):
            d = b(x)
            if d == 0.0:
                raise PoleError("division by zero")
            return a(x) / d
        return div

    def power(x):
        u, c = a(x), b(x)
        return _pow_derivs(u, c, 0)[0]

    return power


def _compile_jet(node: Node, index: Mapping[str, int], n: int, order: int, guard: float):
    """Return (fn, active); fn(x) yields a Jet2 when active, else a float."""
    if isinstance(node, Const):
        v = float(node.value)
        return (lambda x: v), False
    if isinstance(node, Var):
        if node.name not in index:
            raise UnassignedVariable(node.name)
        i = index[node.name]
        unit = np.zeros(n)
        unit[i] = 1.0
        zero = np.zeros((n, n)) if order >= 2 else None
        return (lambda x: Jet2(x[i], unit, zero)), True
    if isinstance(node, Neg):
        a, act = _compile_jet(node.arg, index, n, order, guard)
        if not act:
            return (lambda x: -a(x)), False
        return (lambda x: _jscale(a(x), -1.0)), True
    if isinstance(node, Call):
        parts = [_compile_jet(arg, index, n, order, guard) for arg in node.args]
        if not any(act for _, act in parts):
            return _compile_float(node, index, guard), False
        func = node.func
        if func in ("min", "max"):
            (a, aa), (b, ba) = parts
            lift = _lifter(n, order)

            def minmax(x):
                u = a(x) if aa else lift(a(x))
                v = b(x) if ba else lift(b(x))
                _guard_kink(u.value - v.value, guard, func)
                take_u = (u.value < v.value) == (func == "min")
                return u if take_u else v

            return minmax, True
        a = parts[0][0]

        def call(x):
            u = a(x)
            f0, f1, f2 = _unary_derivs(func, u.value, order, guard)
            return _chain(u, f0, f1, f2)

        return call, True

    a, aa = _compile_jet(node.left, index, n, order, guard)
    b, ba = _compile_jet(node.right, index, n, order, guard)
    if not (aa or ba):
        return _compile_float(node, index, guard), False
    if isinstance(node, Add):
        if aa and ba:
            return (lambda x: _jadd(a(x), b(x))), True
        if aa:
            return (lambda x: _jshift(a(x), b(x))), True
        return (lambda x: _jshift(b(x), a(x))), True
    if isinstance(node, Sub):
        if aa and ba:
            return (lambda x: _jsub(a(x), b(x))), True
        if aa:
            return (lambda x: _jshift(a(x), -b(x))), True
        return (lambda x: _jshift(_jscale(b(x), -1.0), a(x))), True
    if isinstance(node, Mul):
        if aa and ba:
            return (lambda x: _jmul(a(x), b(x))), True
        if aa:
            return (lambda x: _jscale(a(x), b(x))), True
        return (lambda x: _jscale(b(x), a(x))), True
    if isinstance(node, Div):
        if not ba:
            def div_const(x):
                d = b(x)
                if d == 0.0:
                    raise PoleError("division by zero")
                return _jscale(a(x), 1.0 / d)
            return div_const, True

        def div(x):
            d = b(x)
            inv = _chain(d, *_recip_derivs(d.value))
            return _jmul(a(x), inv) if aa else _jscale(inv, a(x))

        return div, True
    # Pow
    if not ba:
        def pow_const(x):
            u = a(x)
            return _chain(u, *_pow_derivs(u.value, b(x), order))
        return pow_const, True
    lift = _lifter(n, order)

    def pow_general(x):
        u = a(x) if aa else lift(a(x))
        if u.value <= 0:
            raise PoleError(f"variable exponent requires a positive base, got {u.value!r}")
        lg = _chain(u, math.log(u.value), 1.0 / u.value, -1.0 / u.value ** 2)
        e = _jmul(lg, b(x))
        ev = math.exp(e.value)
        return _chain(e, ev, ev, ev)

    return pow_general, True


def _lifter(n, order):
    zg = np.zeros(n)
    zh = np.zeros((n, n)) if order >= 2 else None
    return lambda v: Jet2(v, zg, zh)


# ----------------------------------------------------------- Expression

class Expression:
    """Immutable parsed expression; compiled evaluators are cached per variable layout."""

    __slots__ = ("ast", "source", "variables", "_cache")

    def __init__(self, ast: Node, source: str | None = None):
        self.ast = ast
        self.source = source if source is not None else to_source(ast)
        self.variables = variables_of(ast)
        self._cache = {}

    def __repr__(self):
        return f"Expression({self.source!r})"

    def __str__(self):
        return self.source

    def __eq__(self, other):
        return isinstance(other, Expression) and self.ast == other.ast

    def __hash__(self):
        return hash(self.ast)

    def compiled(self, coords: tuple, order: int = 0, guard: float = DEFAULT_SINGULAR_GUARD):
        """Evaluator taking a coordinate sequence laid out as ``coords``.

        order 0 returns floats; orders 1 and 2 return Jet2 (hessian None at order 1).
        """
        key = (coords, order, guard)
        fn = self._cache.get(key)
        if fn is None:
            index = {c: i for i, c in enumerate(coords)}
            missing = self.variables - set(index)
            if missing:
                raise UnassignedVariable(sorted(missing)[0])
            if order == 0:
                fn = _compile_float(self.ast, index, guard)
            else:
                body, active = _compile_jet(self.ast, index, len(coords), order, guard)
                if active:
                    fn = body
                else:
                    lift = _lifter(len(coords), order)
                    fn = lambda x, body=body, lift=lift: lift(body(x))
            self._cache[key] = fn
        return fn

    def __call__(self, point: Mapping[str, float], guard: float = DEFAULT_SINGULAR_GUARD) -> float:
        coords = tuple(point)
        return self.compiled(coords, 0, guard)(tuple(float(point[c]) for c in coords))


def eval_jet(
    expr: Expression | str,
    point: Mapping[str, float],
    order: int = 2,
    variables: Sequence[str] | None = None,
    singular_guard: float = DEFAULT_SINGULAR_GUARD,
) -> Jet2:
    """Evaluate ``expr`` with derivatives w.r.t. ``variables`` (default: keys of ``point``).

    Point entries that are not active variables are held constant.
    """
    if isinstance(expr, str):
        expr = parse(expr)
    if order not in (0, 1, 2):
        raise ValueError("order must be 0, 1 or 2")
    active = tuple(point) if variables is None else tuple(variables)
    for name in active:
        if name not in point:
            raise UnassignedVariable(name)
    passive = tuple(c for c in point if c not in active)
    coords = active + passive
    x = tuple(float(point[c]) for c in coords)
    n = len(active)
    if order == 0:
        return Jet2(expr.compiled(coords, 0, singular_guard)(x), np.zeros(n), None)
    jet = expr.compiled(coords, order, singular_guard)(x)
    if passive:
        h = None if jet.hessian is None else jet.hessian[:n, :n]
        jet = Jet2(jet.value, jet.gradient[:n], h)
    return jet
