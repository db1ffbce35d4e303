"""Closed-form scalar expressions over named coordinates.

Expressions are small immutable trees.  They support exact symbolic partial
derivatives, substitution, vectorised numpy evaluation and a textual grammar
that round-trips through :func:`parse`.

Grammar::

    expr   := term (("+" | "-") term)*
    term   := unary (("*" | "/") unary)*
    unary  := "-" unary | power
    power  := atom ("^" ["-"] INTEGER)?
    atom   := NUMBER | "pi" | NAME | FUNC "(" expr ")" | "(" expr ")"

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``.  ``FUNC`` is
one of ``sin cos exp log ramp box``.  ``ramp`` clamps its argument to [0, 1]
and ``box`` is the indicator of the open interval (0, 1); together they are
enough to write the piecewise-polynomial cutoff functions used for partitions
of unity.
"""

from __future__ import annotations

import math
import re
from collections.abc import Iterable, Mapping
from typing import Union

import numpy as np

Number = Union[int, float]


class ExprSyntaxError(ValueError):
    pass


class Expr:
    """Base class of expression nodes.  Nodes hash by identity."""

    __slots__ = ()

    def __add__(self, other):
        return add(self, as_expr(other))

    def __radd__(self, other):
        return add(as_expr(other), self)

    def __sub__(self, other):
        return add(self, neg(as_expr(other)))

    def __rsub__(self, other):
        return add(as_expr(other), neg(self))

    def __mul__(self, other):
        return mul(self, as_expr(other))

    def __rmul__(self, other):
        return mul(as_expr(other), self)

    def __truediv__(self, other):
        return div(self, as_expr(other))

    def __rtruediv__(self, other):
        return div(as_expr(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n):
        if isinstance(n, float) and n.is_integer():
            n = int(n)
        if not isinstance(n, int):
            raise TypeError("only integer powers are supported")
        return power(self, n)

    def __str__(self):
        return to_string(self)

    def __repr__(self):
        return f"Expr({to_string(self)!r})"

    def diff(self, var: str) -> "Expr":
        return diff(self, var)

    def evaluate(self, env: Mapping[str, object]):
        return evaluate(self, env)

    @property
    def is_zero(self) -> bool:
        return isinstance(self, Const) and self.value == 0.0


class Const(Expr):
    __slots__ = ("value",)

    def __init__(self, value: Number):
        value = float(value)
        if not math.isfinite(value):
            raise ValueError(f"non-finite constant {value}")
        self.value = value + 0.0  # drops the sign of -0.0


class Var(Expr):
    __slots__ = ("name",)

    def __init__(self, name: str):
        self.name = name


class Sum(Expr):
    __slots__ = ("terms",)

    def __init__(self, terms: tuple[Expr, ...]):
        self.terms = terms


class Product(Expr):
    __slots__ = ("factors",)

    def __init__(self, factors: tuple[Expr, ...]):
        self.factors = factors


class Quotient(Expr):
    __slots__ = ("num", "den")

    def __init__(self, num: Expr, den: Expr):
        self.num = num
        self.den = den


class Power(Expr):
    __slots__ = ("base", "exponent")

    def __init__(self, base: Expr, exponent: int):
        self.base = base
        self.exponent = exponent


class Apply(Expr):
    __slots__ = ("fn", "arg")

    def __init__(self, fn: str, arg: Expr):
        if fn not in FUNCTIONS:
            raise ValueError(f"unknown function {fn!r}")
        self.fn = fn
        self.arg = arg


ZERO = Const(0.0)
ONE = Const(1.0)
PI = Const(math.pi)


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.integer, np.floating)):
        return Const(float(x))
    if isinstance(x, str):
        return parse(x)
    raise TypeError(f"cannot convert {type(x).__name__} to an expression")


def var(name: str) -> Var:
    return Var(name)


# ---------------------------------------------------------------------------
# smart constructors: constant folding and 0/1 absorption only


def add(*terms: Expr) -> Expr:
    flat: list[Expr] = []
    const = 0.0
    for t in terms:
        parts = t.terms if isinstance(t, Sum) else (t,)
        for p in parts:
            if isinstance(p, Const):
                const += p.value
            else:
                flat.append(p)
    if const != 0.0:
        flat.append(Const(const))
    if not flat:
        return ZERO
    if len(flat) == 1:
        return flat[0]
    return Sum(tuple(flat))


def mul(*factors: Expr) -> Expr:
    flat: list[Expr] = []
    const = 1.0
    for f in factors:
        parts = f.factors if isinstance(f, Product) else (f,)
        for p in parts:
            if isinstance(p, Const):
                const *= p.value
            else:
                flat.append(p)
    if const == 0.0:
        return ZERO
    if const != 1.0:
        flat.insert(0, Const(const))
    if not flat:
        return ONE
    if len(flat) == 1:
        return flat[0]
    return Product(tuple(flat))


def neg(x: Expr) -> Expr:
    return mul(Const(-1.0), x)


def div(num: Expr, den: Expr) -> Expr:
    if isinstance(den, Const):
        if den.value == 0.0:
            raise ZeroDivisionError("division by the constant 0")
        return mul(Const(1.0 / den.value), num)
    if num.is_zero:
        return ZERO
    return Quotient(num, den)


def power(base: Expr, n: int) -> Expr:
    if n == 0:
        return ONE
    if n == 1:
        return base
    if isinstance(base, Const):
        return Const(base.value**n)
    if isinstance(base, Power):
        return power(base.base, base.exponent * n)
    return Power(base, n)


def apply(fn: str, arg: Expr) -> Expr:
    if isinstance(arg, Const):
        return Const(float(FUNCTIONS[fn][0](arg.value)))
    return Apply(fn, arg)


def sin(x) -> Expr:
    return apply("sin", as_expr(x))


def cos(x) -> Expr:
    return apply("cos", as_expr(x))


def exp(x) -> Expr:
    return apply("exp", as_expr(x))


def log(x) -> Expr:
    return apply("log", as_expr(x))


def ramp(x) -> Expr:
    return apply("ramp", as_expr(x))


def box(x) -> Expr:
    return apply("box", as_expr(x))


def _box_np(x):
    return np.where((x > 0.0) & (x < 1.0), 1.0, 0.0)


FUNCTIONS = {
    # name: (numpy implementation, derivative of f at arg)
    "sin": (np.sin, lambda a: cos(a)),
    "cos": (np.cos, lambda a: neg(sin(a))),
    "exp": (np.exp, lambda a: exp(a)),
    "log": (np.log, lambda a: div(ONE, a)),
    "ramp": (lambda x: np.clip(x, 0.0, 1.0), lambda a: box(a)),
    "box": (_box_np, lambda a: ZERO),
}


# ---------------------------------------------------------------------------
# calculus and evaluation


def diff(expr: Expr, name: str, _memo: dict | None = None) -> Expr:
    """Exact partial derivative of ``expr`` with respect to variable ``name``."""
    memo = {} if _memo is None else _memo
    key = id(expr)
    if key in memo:
        return memo[key][1]

    def rec(e):
        return diff(e, name, memo)

    if isinstance(expr, Const):
        out = ZERO
    elif isinstance(expr, Var):
        out = ONE if expr.name == name else ZERO
    elif isinstance(expr, Sum):
        out = add(*(rec(t) for t in expr.terms))
    elif isinstance(expr, Product):
        parts = []
        fs = expr.factors
        for i, f in enumerate(fs):
            df = rec(f)
            if not df.is_zero:
                parts.append(mul(*fs[:i], df, *fs[i + 1 :]))
        out = add(*parts)
    elif isinstance(expr, Quotient):
        dn, dd = rec(expr.num), rec(expr.den)
        out = div(add(mul(dn, expr.den), neg(mul(expr.num, dd))), power(expr.den, 2))
    elif isinstance(expr, Power):
        db = rec(expr.base)
        out = mul(Const(expr.exponent), power(expr.base, expr.exponent - 1), db)
    elif isinstance(expr, Apply):
        da = rec(expr.arg)
        out = ZERO if da.is_zero else mul(FUNCTIONS[expr.fn][1](expr.arg), da)
    else:  # pragma: no cover
        raise TypeError(type(expr))
    memo[key] = (expr, out)  # keep expr alive so its id is not reused
    return out


def substitute(expr: Expr, mapping: Mapping[str, Expr], _memo: dict | None = None) -> Expr:
    """Replace variables by expressions (simultaneously)."""
    memo = {} if _memo is None else _memo
    key = id(expr)
    if key in memo:
        return memo[key][1]

    def rec(e):
        return substitute(e, mapping, memo)

    if isinstance(expr, Const):
        out = expr
    elif isinstance(expr, Var):
        out = mapping.get(expr.name, expr)
    elif isinstance(expr, Sum):
        out = add(*(rec(t) for t in expr.terms))
    elif isinstance(expr, Product):
        out = mul(*(rec(f) for f in expr.factors))
    elif isinstance(expr, Quotient):
        out = div(rec(expr.num), rec(expr.den))
    elif isinstance(expr, Power):
        out = power(rec(expr.base), expr.exponent)
    elif isinstance(expr, Apply):
        out = apply(expr.fn, rec(expr.arg))
    else:  # pragma: no cover
        raise TypeError(type(expr))
    memo[key] = (expr, out)
    return out


def free_vars(expr: Expr) -> frozenset[str]:
    seen: set[int] = set()
    names: set[str] = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if id(e) in seen:
            continue
        seen.add(id(e))
        if isinstance(e, Var):
            names.add(e.name)
        elif isinstance(e, Sum):
            stack.extend(e.terms)
        elif isinstance(e, Product):
            stack.extend(e.factors)
        elif isinstance(e, Quotient):
            stack.extend((e.num, e.den))
        elif isinstance(e, Power):
            stack.append(e.base)
        elif isinstance(e, Apply):
            stack.append(e.arg)
    return frozenset(names)


def evaluate(expr: Expr, env: Mapping[str, object], _memo: dict | None = None):
    """Evaluate at the points given by ``env`` (scalars or broadcastable arrays).

    Shared subtrees are evaluated once per call.
    """
    memo = {} if _memo is None else _memo
    key = id(expr)
    if key in memo:
        return memo[key][1]

    def rec(e):
        return evaluate(e, env, memo)

    if isinstance(expr, Const):
        out = expr.value
    elif isinstance(expr, Var):
        try:
            out = env[expr.name]
        except KeyError:
            raise KeyError(f"no value for variable {expr.name!r}") from None
    elif isinstance(expr, Sum):
        out = rec(expr.terms[0])
        for t in expr.terms[1:]:
            out = out + rec(t)
    elif isinstance(expr, Product):
        out = rec(expr.factors[0])
        for f in expr.factors[1:]:
            out = out * rec(f)
    elif isinstance(expr, Quotient):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.divide(rec(expr.num), rec(expr.den))
    elif isinstance(expr, Power):
        b = rec(expr.base)
        if expr.exponent < 0:
            with np.errstate(divide="ignore", invalid="ignore"):
                out = np.divide(1.0, np.power(b, -expr.exponent))
        else:
            out = np.power(b, expr.exponent)
    elif isinstance(expr, Apply):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = FUNCTIONS[expr.fn][0](rec(expr.arg))
    else:  # pragma: no cover
        raise TypeError(type(expr))
    memo[key] = (expr, out)
    return out


def kinks(expr: Expr, name: str) -> list[float]:
    """Values of ``name`` where a ``ramp``/``box`` argument affine in ``name`` hits 0 or 1.

    Piecewise expressions are smooth between these points, which lets
    quadrature split its panels there.
    """
    found: set[float] = set()
    seen: set[int] = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if id(e) in seen:
            continue
        seen.add(id(e))
        if isinstance(e, Sum):
            stack.extend(e.terms)
        elif isinstance(e, Product):
            stack.extend(e.factors)
        elif isinstance(e, Quotient):
            stack.extend((e.num, e.den))
        elif isinstance(e, Power):
            stack.append(e.base)
        elif isinstance(e, Apply):
            stack.append(e.arg)
            if e.fn in ("ramp", "box") and free_vars(e.arg) == {name}:
                slope = diff(e.arg, name)
                if isinstance(slope, Const) and slope.value != 0.0:
                    offset = float(evaluate(e.arg, {name: 0.0}))
                    found.update(((0.0 - offset) / slope.value, (1.0 - offset) / slope.value))
    return sorted(found)


def node_count(expr: Expr) -> int:
    seen: set[int] = set()
    stack = [expr]
    while stack:
        e = stack.pop()
        if id(e) in seen:
            continue
        seen.add(id(e))
        if isinstance(e, Sum):
            stack.extend(e.terms)
        elif isinstance(e, Product):
            stack.extend(e.factors)
        elif isinstance(e, Quotient):
            stack.extend((e.num, e.den))
        elif isinstance(e, Power):
            stack.append(e.base)
        elif isinstance(e, Apply):
            stack.append(e.arg)
    return len(seen)


# ---------------------------------------------------------------------------
# printing


def _fmt_const(v: float) -> str:
    if v == math.pi:
        return "pi"
    return repr(v)


def _negated_product(e: Expr) -> Expr | None:
    """If ``e`` carries a negative leading constant, return ``-e``."""
    if isinstance(e, Const) and e.value < 0:
        return Const(-e.value)
    if isinstance(e, Product) and isinstance(e.factors[0], Const) and e.factors[0].value < 0:
        c = -e.factors[0].value
        rest = e.factors[1:]
        return mul(Const(c), *rest)
    return None


def to_string(e: Expr) -> str:
    if isinstance(e, Const):
        return _fmt_const(e.value)
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Sum):
        out = []
        for i, t in enumerate(e.terms):
            n = _negated_product(t)
            if n is not None:
                out.append(("-" if i == 0 else " - ") + _factor_str(n))
            else:
                out.append(("" if i == 0 else " + ") + _factor_str(t))
        return "".join(out)
    n = _negated_product(e)
    if n is not None:
        return "-" + _factor_str(n)
    return _factor_str(e)


def _factor_str(e: Expr) -> str:
    """String for a non-negated term."""
    if isinstance(e, Product):
        parts = []
        for f in e.factors:
            if isinstance(f, (Sum, Quotient)):
                parts.append(f"({to_string(f)})")
            else:
                parts.append(_atomish(f))
        return "*".join(parts)
    if isinstance(e, Quotient):
        num = to_string(e.num) if isinstance(e.num, (Product, Quotient)) else _atomish(e.num)
        if isinstance(e.num, Sum):
            num = f"({to_string(e.num)})"
        den = _atomish(e.den) if isinstance(e.den, (Var, Apply, Power)) else f"({to_string(e.den)})"
        return f"{num}/{den}"
    return _atomish(e)


def _atomish(e: Expr) -> str:
    if isinstance(e, Const):
        s = _fmt_const(e.value)
        return f"({s})" if e.value < 0 else s
    if isinstance(e, Var):
        return e.name
    if isinstance(e, Apply):
        return f"{e.fn}({to_string(e.arg)})"
    if isinstance(e, Power):
        b = e.base
        bs = _atomish(b) if isinstance(b, (Var, Apply)) else f"({to_string(b)})"
        return f"{bs}^{e.exponent}"
    return f"({to_string(e)})"


# ---------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character at {pos} in {text!r}")
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, text: str, variables: Iterable[str] | None):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.variables = None if variables is None else set(variables)

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def take(self, value=None):
        tok = self.peek()
        if tok[0] is None:
            raise ExprSyntaxError(f"unexpected end of {self.text!r}")
        if value is not None and tok[1] != value:
            raise ExprSyntaxError(f"expected {value!r}, got {tok[1]!r} in {self.text!r}")
        self.pos += 1
        return tok

    def parse(self) -> Expr:
        if not self.tokens:
            raise ExprSyntaxError("empty expression")
        e = self.expr()
        if self.pos != len(self.tokens):
            raise ExprSyntaxError(f"trailing input {self.peek()[1]!r} in {self.text!r}")
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek() in (("op", "+"), ("op", "-")):
            op = self.take()[1]
            t = self.term()
            e = add(e, t) if op == "+" else add(e, neg(t))
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek() in (("op", "*"), ("op", "/")):
            op = self.take()[1]
            u = self.unary()
            e = mul(e, u) if op == "*" else div(e, u)
        return e

    def unary(self) -> Expr:
        if self.peek() == ("op", "-"):
            self.take()
            return neg(self.unary())
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.take()
            sign = 1
            if self.peek() == ("op", "-"):
                self.take()
                sign = -1
            kind, tok = self.take()
            if kind != "num" or not re.fullmatch(r"\d+", tok):
                raise ExprSyntaxError(f"exponent must be an integer literal, got {tok!r}")
            return power(base, sign * int(tok))
        return base

    def atom(self) -> Expr:
        kind, tok = self.take()
        if kind == "num":
            return Const(float(tok))
        if kind == "name":
            if tok == "pi":
                return PI
            if tok in FUNCTIONS:
                self.take("(")
                arg = self.expr()
                self.take(")")
                return apply(tok, arg)
            if self.variables is not None and tok not in self.variables:
                raise ExprSyntaxError(f"unknown variable {tok!r} in {self.text!r}")
            return Var(tok)
        if tok == "(":
            e = self.expr()
            self.take(")")
            return e
        raise ExprSyntaxError(f"unexpected {tok!r} in {self.text!r}")


def parse(text: str, variables: Iterable[str] | None = None) -> Expr:
    """Parse an expression string; optionally restrict the allowed variable names."""
    return _Parser(text, variables).parse()
