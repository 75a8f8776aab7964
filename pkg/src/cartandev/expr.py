"""Small closed-form expression language for frame coefficients.

Grammar (loosest to tightest binding):

    expr    := term (('+'|'-') term)*
    term    := factor (('*'|'/') factor)*
    factor  := '-' factor | power
    power   := atom ('^' factor)?          # right-associative, exponent uint
    atom    := number | name | name '(' expr ')' | '(' expr ')'

Names are either coordinate variables or the functions sin, cos, exp.
Expressions support exact symbolic differentiation and vectorized
evaluation on numpy arrays.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

from .errors import ExprSyntaxError, UnknownIdentifier

_FUNCS = {"sin": np.sin, "cos": np.cos, "exp": np.exp}


class Expr:
    """Base class; subclasses are immutable AST nodes."""

    def __call__(self, env):
        """Evaluate with env mapping variable names to floats or arrays."""
        raise NotImplementedError

    def diff(self, var):
        raise NotImplementedError

    def variables(self):
        out = set()
        self._collect(out)
        return out

    def _collect(self, out):
        pass

    def __repr__(self):
        return f"<{type(self).__name__} {self}>"


@dataclass(frozen=True, repr=False)
class Const(Expr):
    value: float

    def __call__(self, env):
        return self.value

    def diff(self, var):
        return Const(0.0)

    def __str__(self):
        return repr(self.value)


@dataclass(frozen=True, repr=False)
class Var(Expr):
    name: str

    def __call__(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise UnknownIdentifier(f"unknown variable {self.name!r}") from None

    def diff(self, var):
        return Const(1.0 if var == self.name else 0.0)

    def _collect(self, out):
        out.add(self.name)

    def __str__(self):
        return self.name


def _is_const(e, v=None):
    return isinstance(e, Const) and (v is None or e.value == v)


@dataclass(frozen=True, repr=False)
class Neg(Expr):
    arg: Expr

    def __call__(self, env):
        return -self.arg(env)

    def diff(self, var):
        return neg(self.arg.diff(var))

    def _collect(self, out):
        self.arg._collect(out)

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True, repr=False)
class Add(Expr):
    left: Expr
    right: Expr

    def __call__(self, env):
        return self.left(env) + self.right(env)

    def diff(self, var):
        return add(self.left.diff(var), self.right.diff(var))

    def _collect(self, out):
        self.left._collect(out)
        self.right._collect(out)

    def __str__(self):
        return f"({self.left} + {self.right})"


@dataclass(frozen=True, repr=False)
class Sub(Expr):
    left: Expr
    right: Expr

    def __call__(self, env):
        return self.left(env) - self.right(env)

    def diff(self, var):
        return sub(self.left.diff(var), self.right.diff(var))

    def _collect(self, out):
        self.left._collect(out)
        self.right._collect(out)

    def __str__(self):
        return f"({self.left} - {self.right})"


@dataclass(frozen=True, repr=False)
class Mul(Expr):
    left: Expr
    right: Expr

    def __call__(self, env):
        return self.left(env) * self.right(env)

    def diff(self, var):
        return add(mul(self.left.diff(var), self.right),
                   mul(self.left, self.right.diff(var)))

    def _collect(self, out):
        self.left._collect(out)
        self.right._collect(out)

    def __str__(self):
        return f"({self.left} * {self.right})"


@dataclass(frozen=True, repr=False)
class Div(Expr):
    left: Expr
    right: Expr

    def __call__(self, env):
        return self.left(env) / self.right(env)

    def diff(self, var):
        num = sub(mul(self.left.diff(var), self.right),
                  mul(self.left, self.right.diff(var)))
        return div(num, Pow(self.right, 2))

    def _collect(self, out):
        self.left._collect(out)
        self.right._collect(out)

    def __str__(self):
        return f"({self.left} / {self.right})"


@dataclass(frozen=True, repr=False)
class Pow(Expr):
    base: Expr
    exponent: int     # non-negative integer only

    def __call__(self, env):
        return self.base(env) ** self.exponent

    def diff(self, var):
        if self.exponent == 0:
            return Const(0.0)
        return mul(mul(Const(float(self.exponent)),
                       pow_(self.base, self.exponent - 1)),
                   self.base.diff(var))

    def _collect(self, out):
        self.base._collect(out)

    def __str__(self):
        return f"({self.base}^{self.exponent})"


@dataclass(frozen=True, repr=False)
class Call(Expr):
    func: str        # 'sin' | 'cos' | 'exp'
    arg: Expr

    def __call__(self, env):
        return _FUNCS[self.func](self.arg(env))

    def diff(self, var):
        inner = self.arg.diff(var)
        if self.func == "sin":
            outer = Call("cos", self.arg)
        elif self.func == "cos":
            outer = neg(Call("sin", self.arg))
        else:
            outer = self
        return mul(outer, inner)

    def _collect(self, out):
        self.arg._collect(out)

    def __str__(self):
        return f"{self.func}({self.arg})"


# -- constant-folding constructors -------------------------------------------

def neg(e):
    if _is_const(e):
        return Const(-e.value)
    if isinstance(e, Neg):
        return e.arg
    return Neg(e)


def add(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Add(a, b)


def sub(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Sub(a, b)


def mul(a, b):
    if _is_const(a) and _is_const(b):
        return Const(a.value * b.value)
    if _is_const(a, 0.0) or _is_const(b, 0.0):
        return Const(0.0)
    if _is_const(a, 1.0):
        return b
    if _is_const(b, 1.0):
        return a
    return Mul(a, b)


def div(a, b):
    if _is_const(a, 0.0):
        return Const(0.0)
    if _is_const(b, 1.0):
        return a
    if _is_const(a) and _is_const(b) and b.value != 0:
        return Const(a.value / b.value)
    return Div(a, b)


def pow_(a, k):
    if k == 0:
        return Const(1.0)
    if k == 1:
        return a
    if _is_const(a):
        return Const(a.value ** k)
    return Pow(a, k)


# -- parser -------------------------------------------------------------------

_TOKEN = re.compile(r"""\s*(?:
    (?P<number>\d+\.\d*|\.\d+|\d+)
  | (?P<name>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op>[-+*/^()])
)""", re.VERBOSE)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == m.start():
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            at = len(text) - len(stripped)
            raise ExprSyntaxError(f"unexpected character {text[at]!r}", at)
        if m.lastgroup == "number":
            tokens.append(("number", m.group("number"), m.start("number")))
        elif m.lastgroup == "name":
            tokens.append(("name", m.group("name"), m.start("name")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, op):
        kind, val, pos = self.peek()
        if kind != "op" or val != op:
            raise ExprSyntaxError(f"expected {op!r}", pos)
        return self.advance()

    def parse(self):
        e = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ExprSyntaxError(f"unexpected token {val!r}", pos)
        return e

    def expr(self):
        e = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "+-":
                self.advance()
                rhs = self.term()
                e = add(e, rhs) if val == "+" else sub(e, rhs)
            else:
                return e

    def term(self):
        e = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in "*/":
                self.advance()
                rhs = self.factor()
                e = mul(e, rhs) if val == "*" else div(e, rhs)
            else:
                return e

    def factor(self):
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return neg(self.factor())
        return self.power()

    def power(self):
        base = self.atom()
        kind, val, pos = self.peek()
        if kind == "op" and val == "^":
            self.advance()
            kind, val, pos = self.peek()
            if kind != "number" or not val.isdigit():
                raise ExprSyntaxError(
                    "exponent must be a non-negative integer literal", pos)
            self.advance()
            return pow_(base, int(val))
        return base

    def atom(self):
        kind, val, pos = self.advance()
        if kind == "number":
            return Const(float(val))
        if kind == "name":
            nk, nv, _ = self.peek()
            if nk == "op" and nv == "(":
                if val not in _FUNCS:
                    raise ExprSyntaxError(f"unknown function {val!r}", pos)
                self.advance()
                arg = self.expr()
                self.expect_op(")")
                if _is_const(arg):
                    return Const(float(_FUNCS[val](arg.value)))
                return Call(val, arg)
            return Var(val)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect_op(")")
            return e
        raise ExprSyntaxError(f"unexpected token {val!r}" if val else
                              "unexpected end of input", pos)


def parse(text):
    """Parse an expression string into an Expr tree (constant-folded)."""
    return _Parser(text).parse()


def evaluate(text_or_expr, env):
    e = parse(text_or_expr) if isinstance(text_or_expr, str) else text_or_expr
    return e(env)
