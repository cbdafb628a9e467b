"""Analytic expression language with exact second-order forward-mode jets.

Expressions are parsed once into an immutable tree and can then be evaluated
at batches of points together with their coordinate gradient and Hessian::

    >>> e = parse("x1^2 + x2^2", 2)
    >>> j = eval_jet2(e, (3.0, 4.0))
    >>> float(j.value), j.gradient.tolist()
    (25.0, [6.0, 8.0])

The grammar (see ``docs/grammar.md``)::

    expr   = term , { ("+" | "-") , term } ;
    term   = factor , { ("*" | "/") , factor } ;
    factor = ("-" | "+") , factor | power ;
    power  = atom , [ "^" , factor ] ;
    atom   = number | "pi" | name , "(" , expr , { "," , expr } , ")"
           | variable | "(" , expr , ")" ;

Variables are ``x1 .. xn``. For ``n <= 4`` the aliases ``x, y, z, t`` name the
first four coordinates and ``r`` names the last one (the collar coordinate of a
normal-form chart).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import DomainError, ParseError, PreconditionError

__all__ = [
    "Num", "Var", "Neg", "BinOp", "Call", "Expression", "Jet2",
    "parse", "eval_jet2", "to_source", "as_points",
]

FUNCTIONS = {"sin": 1, "cos": 1, "exp": 1, "log": 1, "sqrt": 1, "atan": 1, "atan2": 2}
ALIASES = ("x", "y", "z", "t")


# -- tree -------------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # zero based


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Node = Union[Num, Var, Neg, BinOp, Call]


def to_source(node: Node) -> str:
    """Print a tree so that parsing the text gives back the same tree."""
    if isinstance(node, Num):
        if node.value < 0:
            return f"(-{repr(-node.value)})"
        return repr(node.value)
    if isinstance(node, Var):
        return f"x{node.index + 1}"
    if isinstance(node, Neg):
        return f"(-{to_source(node.arg)})"
    if isinstance(node, BinOp):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    args = ", ".join(to_source(a) for a in node.args)
    return f"{node.func}({args})"


# -- parser -----------------------------------------------------------------

_TOKEN = re.compile(
    r"(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


class _Parser:
    def __init__(self, source, n_vars, names=None):
        self.names = tuple(names or ())
        self.source = source
        self.n_vars = n_vars
        self.tokens = []  # (kind, text, byte offset)
        pos = 0
        while True:
            while pos < len(source) and source[pos].isspace():
                pos += 1
            if pos == len(source):
                break
            m = _TOKEN.match(source, pos)
            if m is None:
                raise ParseError(f"unexpected character {source[pos]!r}", self._byte(pos),
                                 ["number", "variable", "operator"])
            self.tokens.append((m.lastgroup, m.group(m.lastgroup), self._byte(pos)))
            pos = m.end()
        self.end = self._byte(len(source))
        self.i = 0

    def _byte(self, char_index):
        return len(self.source[:char_index].encode("utf-8"))

    def peek(self):
        return self.tokens[self.i] if self.i < len(self.tokens) else ("eof", "", self.end)

    def take(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, text):
        kind, got, off = self.take()
        if got != text:
            raise ParseError(f"unexpected {got or 'end of input'!r}", off, [repr(text)])

    def parse(self):
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected {text!r}", off, ["operator", "end of input"])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-"):
            op = self.take()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.peek()[1] in ("*", "/"):
            op = self.take()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self):
        text = self.peek()[1]
        if text == "-":
            self.take()
            return Neg(self.factor())
        if text == "+":
            self.take()
            return self.factor()
        return self.power()

    def power(self):
        base = self.atom()
        if self.peek()[1] == "^":
            self.take()
            return BinOp("^", base, self.factor())
        return base

    def atom(self):
        kind, text, off = self.take()
        if kind == "num":
            return Num(float(text))
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if self.peek()[1] == "(":
                if text not in FUNCTIONS:
                    raise ParseError(f"unknown function {text!r}", off, sorted(FUNCTIONS))
                self.take()
                args = [self.expr()]
                while self.peek()[1] == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[text]:
                    raise ParseError(
                        f"{text} takes {FUNCTIONS[text]} argument(s), got {len(args)}", off)
                return Call(text, tuple(args))
            if text == "pi":
                return Num(math.pi)
            return Var(self.variable(text, off))
        expected = ["number", "variable", "function", "'('", "'-'"]
        raise ParseError(f"unexpected {text or 'end of input'!r}", off, expected)

    def variable(self, name, off):
        n = self.n_vars
        if name in self.names:
            return self.names.index(name)
        m = re.fullmatch(r"x([1-9]\d*)", name)
        if m:
            k = int(m.group(1))
            if k <= n:
                return k - 1
        elif n <= 4 and name in ALIASES and ALIASES.index(name) < n:
            return ALIASES.index(name)
        elif n <= 4 and name == "r":
            return n - 1
        allowed = list(self.names) + [f"x{k}" for k in range(1, n + 1)]
        raise ParseError(f"unknown identifier {name!r}", off, allowed)


def parse(source: str, n_vars: int, names=None) -> "Expression":
    """Parse ``source`` into an :class:`Expression` in ``n_vars`` variables.

    ``names`` optionally gives custom identifiers for the variables in order,
    e.g. ``("t",)`` for a function of a leaf value.
    """
    if n_vars < 1:
        raise PreconditionError("n_vars must be at least 1")
    if names is not None and len(names) > n_vars:
        raise PreconditionError("more variable names than variables")
    return Expression(_Parser(source, n_vars, names).parse(), n_vars, source)


# -- jets -------------------------------------------------------------------

@dataclass(frozen=True)
class Jet2:
    """Value, coordinate gradient and coordinate Hessian of a scalar field.

    For a batch of ``m`` points the shapes are ``(m,)``, ``(m, n)`` and
    ``(m, n, n)``; for a single point the leading axis is dropped.
    """

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray

    def __getitem__(self, idx):
        return Jet2(self.value[idx], self.gradient[idx], self.hessian[idx])


def as_points(p, n):
    """Return ``(points[m, n], single)`` for a point or a batch of points."""
    arr = np.asarray(p, dtype=float)
    single = arr.ndim == 1
    arr = np.atleast_2d(arr)
    if arr.ndim != 2 or arr.shape[1] != n:
        raise PreconditionError(f"expected points with {n} coordinates, got shape {np.shape(p)}")
    return arr, single


def _outer(a, b):
    return a[:, :, None] * b[:, None, :]


def _sym(a, b):
    return _outer(a, b) + _outer(b, a)


class _Eval:
    """One pass of forward-mode evaluation over a batch of points."""

    def __init__(self, pts, strict, order):
        self.pts = pts
        self.m, self.n = pts.shape
        self.strict = strict
        self.order = order

    def fail(self, node, mask, reason):
        if self.strict:
            i = int(np.flatnonzero(mask)[0])
            raise DomainError(f"{reason} in {to_source(node)} at point {self.pts[i].tolist()}")

    def const(self, c):
        v = np.full(self.m, float(c))
        g = np.zeros((self.m, self.n))
        h = np.zeros((self.m, self.n, self.n)) if self.order > 1 else None
        return v, g, h

    def chain(self, u, f0, f1, f2):
        v, g, h = u
        gg = f1[:, None] * g
        hh = None
        if self.order > 1:
            hh = f1[:, None, None] * h + f2[:, None, None] * _outer(g, g)
        return f0, gg, hh

    def __call__(self, node):
        with np.errstate(all="ignore"):
            return self.visit(node)

    def visit(self, node):
        if isinstance(node, Num):
            return self.const(node.value)
        if isinstance(node, Var):
            v, g, h = self.const(0.0)
            v = self.pts[:, node.index].copy()
            g[:, node.index] = 1.0
            return v, g, h
        if isinstance(node, Neg):
            v, g, h = self.visit(node.arg)
            return -v, -g, (-h if h is not None else None)
        if isinstance(node, BinOp):
            return self.binop(node)
        return self.call(node)

    def binop(self, node):
        op = node.op
        if op == "^":
            return self.power(node)
        a = self.visit(node.left)
        b = self.visit(node.right)
        av, ag, ah = a
        bv, bg, bh = b
        two = self.order > 1
        if op == "+":
            return av + bv, ag + bg, (ah + bh if two else None)
        if op == "-":
            return av - bv, ag - bg, (ah - bh if two else None)
        if op == "*":
            v = av * bv
            g = ag * bv[:, None] + bg * av[:, None]
            h = None
            if two:
                h = ah * bv[:, None, None] + bh * av[:, None, None] + _sym(ag, bg)
            return v, g, h
        # division
        bad = bv == 0.0
        if bad.any():
            self.fail(node, bad, "division by zero")
            bv = np.where(bad, np.nan, bv)
        q = av / bv
        gq = (ag - q[:, None] * bg) / bv[:, None]
        h = None
        if two:
            h = (ah - q[:, None, None] * bh - _sym(gq, bg)) / bv[:, None, None]
        return q, gq, h

    def power(self, node):
        base = self.visit(node.left)
        k = _constant_value(node.right)
        if k is not None and float(k).is_integer():
            k = int(k)
            u = base[0]
            if k < 0 and (u == 0.0).any():
                bad = u == 0.0
                self.fail(node, bad, "zero base with negative exponent")
                u = np.where(bad, np.nan, u)
                base = (u, base[1], base[2])
            if k == 0:
                return self.const(1.0)
            f0 = u ** k
            f1 = k * u ** (k - 1)
            f2 = k * (k - 1) * u ** (k - 2) if k not in (0, 1) else np.zeros_like(u)
            return self.chain(base, f0, f1, f2)
        u = base[0]
        bad = ~(u > 0.0)
        if bad.any():
            self.fail(node, bad, "non-integer power of a nonpositive base")
        logu = self.chain(base, np.log(u), 1.0 / u, -1.0 / u ** 2)
        expo = self.visit(node.right)
        prod = self.binop_values("*", logu, expo)
        e = np.exp(prod[0])
        return self.chain(prod, e, e, e)

    def binop_values(self, op, a, b):
        av, ag, ah = a
        bv, bg, bh = b
        v = av * bv
        g = ag * bv[:, None] + bg * av[:, None]
        h = None
        if self.order > 1:
            h = ah * bv[:, None, None] + bh * av[:, None, None] + _sym(ag, bg)
        return v, g, h

    def call(self, node):
        name = node.func
        if name == "atan2":
            return self.atan2(node)
        u = self.visit(node.args[0])
        x = u[0]
        if name == "sin":
            s, c = np.sin(x), np.cos(x)
            return self.chain(u, s, c, -s)
        if name == "cos":
            s, c = np.sin(x), np.cos(x)
            return self.chain(u, c, -s, -c)
        if name == "exp":
            e = np.exp(x)
            return self.chain(u, e, e, e)
        if name == "atan":
            d = 1.0 / (1.0 + x * x)
            return self.chain(u, np.arctan(x), d, -2.0 * x * d * d)
        bad = ~(x > 0.0)
        if bad.any():
            self.fail(node, bad, f"{name} of a nonpositive argument")
            x = np.where(bad, np.nan, x)
        if name == "log":
            return self.chain(u, np.log(x), 1.0 / x, -1.0 / (x * x))
        s = np.sqrt(x)
        return self.chain(u, s, 0.5 / s, -0.25 / (s * x))

    def atan2(self, node):
        yv, yg, yh = self.visit(node.args[0])
        xv, xg, xh = self.visit(node.args[1])
        rho2 = xv * xv + yv * yv
        bad = rho2 == 0.0
        if bad.any():
            self.fail(node, bad, "atan2 at the origin")
            rho2 = np.where(bad, np.nan, rho2)
        fy, fx = xv / rho2, -yv / rho2
        v = np.arctan2(yv, xv)
        g = fy[:, None] * yg + fx[:, None] * xg
        h = None
        if self.order > 1:
            r4 = rho2 * rho2
            fyy, fxx, fxy = -2 * xv * yv / r4, 2 * xv * yv / r4, (yv * yv - xv * xv) / r4
            h = (fy[:, None, None] * yh + fx[:, None, None] * xh
                 + fyy[:, None, None] * _outer(yg, yg) + fxx[:, None, None] * _outer(xg, xg)
                 + fxy[:, None, None] * _sym(yg, xg))
        return v, g, h


def _constant_value(node):
    """Value of a variable-free subtree, else None."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return None
    if isinstance(node, Neg):
        v = _constant_value(node.arg)
        return None if v is None else -v
    if isinstance(node, BinOp):
        a, b = _constant_value(node.left), _constant_value(node.right)
        if a is None or b is None:
            return None
        try:
            return {"+": a + b, "-": a - b, "*": a * b,
                    "/": a / b if b else None, "^": a ** b if a > 0 or float(b).is_integer() else None}[node.op]
        except (OverflowError, ZeroDivisionError):
            return None
    return None


# -- public expression -------------------------------------------------------

class Expression:
    """An immutable parsed expression in ``n_vars`` chart variables.

    Instances are scalar fields: ``jet(points)`` returns a :class:`Jet2` and
    calling the expression returns plain values. Arithmetic operators build new
    trees, so ``f + 0.1 * u`` is again an :class:`Expression`.
    """

    backend = "analytic"

    def __init__(self, ast: Node, n_vars: int, source: str | None = None):
        self.ast = ast
        self.dim = n_vars
        self._source = source

    @property
    def n_vars(self):
        return self.dim

    @property
    def source(self):
        return self._source if self._source is not None else to_source(self.ast)

    def __repr__(self):
        return f"Expression({self.source!r}, n_vars={self.dim})"

    def __eq__(self, other):
        return isinstance(other, Expression) and self.ast == other.ast and self.dim == other.dim

    def __hash__(self):
        return hash((self.ast, self.dim))

    def _evaluate(self, points, order, strict=True):
        pts, single = as_points(points, self.dim)
        v, g, h = _Eval(pts, strict, order)(self.ast)
        if strict:
            parts = [v, g] + ([h] if order > 1 else [])
            for part in parts:
                if not np.all(np.isfinite(part)):
                    bad = ~np.isfinite(part.reshape(len(pts), -1)).all(axis=1)
                    i = int(np.flatnonzero(bad)[0])
                    raise DomainError(f"non-finite result of {self.source} at point {pts[i].tolist()}")
        return v, g, h, single

    def __call__(self, points, strict=True):
        """Values only; with ``strict=False`` invalid points give NaN instead of raising."""
        pts, single = as_points(points, self.dim)
        v, _, _ = _Eval(pts, strict, 1)(self.ast)
        if strict and not np.all(np.isfinite(v)):
            i = int(np.flatnonzero(~np.isfinite(v))[0])
            raise DomainError(f"non-finite value of {self.source} at point {pts[i].tolist()}")
        return v[0] if single else v

    def jet(self, points, order=2) -> Jet2:
        v, g, h, single = self._evaluate(points, order)
        if h is None:
            h = np.full(g.shape + (self.dim,), np.nan)
        jet = Jet2(v, g, h)
        return jet[0] if single else jet

    def gradient(self, points):
        v, g, _, single = self._evaluate(points, 1)
        return g[0] if single else g

    # arithmetic builds trees
    def _wrap(self, other):
        if isinstance(other, Expression):
            if other.dim != self.dim:
                raise PreconditionError("expressions have different numbers of variables")
            return other.ast
        value = float(other)
        return Num(value) if value >= 0 else Neg(Num(-value))

    def __add__(self, other):
        return Expression(BinOp("+", self.ast, self._wrap(other)), self.dim)

    def __radd__(self, other):
        return Expression(BinOp("+", self._wrap(other), self.ast), self.dim)

    def __sub__(self, other):
        return Expression(BinOp("-", self.ast, self._wrap(other)), self.dim)

    def __rsub__(self, other):
        return Expression(BinOp("-", self._wrap(other), self.ast), self.dim)

    def __mul__(self, other):
        return Expression(BinOp("*", self.ast, self._wrap(other)), self.dim)

    def __rmul__(self, other):
        return Expression(BinOp("*", self._wrap(other), self.ast), self.dim)

    def __truediv__(self, other):
        return Expression(BinOp("/", self.ast, self._wrap(other)), self.dim)

    def __rtruediv__(self, other):
        return Expression(BinOp("/", self._wrap(other), self.ast), self.dim)

    def __pow__(self, other):
        return Expression(BinOp("^", self.ast, self._wrap(other)), self.dim)

    def __neg__(self):
        return Expression(Neg(self.ast), self.dim)

    def apply(self, func: str) -> "Expression":
        """Wrap the expression in a one-argument function, e.g. ``e.apply("log")``."""
        if FUNCTIONS.get(func) != 1:
            raise PreconditionError(f"{func!r} is not a one-argument function")
        return Expression(Call(func, (self.ast,)), self.dim)

    def with_n_vars(self, n_vars: int) -> "Expression":
        """The same tree read as a function of ``n_vars >= dim`` variables."""
        if n_vars < self.dim:
            raise PreconditionError("cannot drop variables")
        return Expression(self.ast, n_vars)

    def is_constant(self):
        return _constant_value(self.ast) is not None


def eval_jet2(e: Expression, p) -> Jet2:
    return e.jet(p, order=2)
