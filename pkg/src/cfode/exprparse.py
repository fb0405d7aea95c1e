"""Tiny expression language for forcings ``f(t)`` and nonlinearities ``phi(t, u)``.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | power
    power  := atom ('^' factor)?
    atom   := NUMBER | 't' | 'u' | IDENT '(' expr ')' | '(' expr ')'

so ``^`` binds tighter than unary minus (``-t^2 == -(t^2)``) and is right
associative. Expressions evaluate on floats or numpy arrays and can be
differentiated symbolically with respect to ``t`` or ``u``.

>>> e = parse("t*exp(-t)")
>>> str(differentiate(e, "t"))
'exp(-t) - t*exp(-t)'
"""

from __future__ import annotations

import math
import re
from collections.abc import Collection
from dataclasses import dataclass

import numpy as np

from .errors import (
    EvalDomainError,
    ExprSyntaxError,
    MissingVariable,
    UnknownIdentifier,
    UnsupportedDifferentiation,
)

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
VARIABLES = ("t", "u")

# deeper trees would exhaust the interpreter stack in eval/differentiate
MAX_DEPTH = 150


class Expr:
    """Base class of the immutable syntax tree."""

    __slots__ = ()

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Num(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Neg(Expr):
    operand: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    func: str
    arg: Expr


# ---------------------------------------------------------------- parsing

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    offset: int  # byte offset into the UTF-8 source


def _tokenize(src: str) -> list[_Token]:
    tokens = []
    pos = 0
    byte = 0
    while pos < len(src):
        m = _TOKEN.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", byte)
        text = m.group()
        if m.lastgroup != "ws":
            tokens.append(_Token(m.lastgroup, text, byte))
        byte += len(text.encode("utf-8"))
        pos = m.end()
    tokens.append(_Token("end", "", byte))
    return tokens


class _Parser:
    def __init__(self, src: str, variables: Collection[str]):
        self.tokens = _tokenize(src)
        self.i = 0
        self.variables = set(variables)
        self.depth = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str):
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise ExprSyntaxError(f"expected {text!r}, found {found!r}", self.tok.offset)
        return self.advance()

    def nest(self, offset: int, levels: int = 1):
        self.depth += levels
        if self.depth > MAX_DEPTH:
            raise ExprSyntaxError("expression nested too deeply", offset)

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.text in ("+", "-"):
            op = self.advance()
            left = BinOp(op.text, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.factor()
        while self.tok.text in ("*", "/"):
            op = self.advance()
            left = BinOp(op.text, left, self.factor())
        return left

    def factor(self) -> Expr:
        if self.tok.text == "-":
            op = self.advance()
            saved = self.depth
            self.nest(op.offset)
            node = Neg(self.factor())
            self.depth = saved
            return node
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.tok.text == "^":
            op = self.advance()
            saved = self.depth
            self.nest(op.offset)
            node = BinOp("^", base, self.factor())
            self.depth = saved
            return node
        return base

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "num":
            self.advance()
            value = float(tok.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"number {tok.text!r} out of range", tok.offset)
            return Num(value)
        if tok.kind == "ident":
            self.advance()
            if tok.text in FUNCTIONS:
                self.expect("(")
                return Call(tok.text, self.group(tok.offset))
            if tok.text in VARIABLES and tok.text in self.variables:
                return Var(tok.text)
            raise UnknownIdentifier(tok.text, tok.offset)
        if tok.text == "(":
            self.advance()
            return self.group(tok.offset)
        found = tok.text or "end of input"
        raise ExprSyntaxError(f"unexpected {found!r}", tok.offset)

    def group(self, offset: int) -> Expr:
        # opening parenthesis already consumed; a group costs more stack than a unary level
        saved = self.depth
        self.nest(offset, 2)
        inner = self.expr()
        self.expect(")")
        self.depth = saved
        return inner


def parse(src: str, variables: Collection[str] = VARIABLES) -> Expr:
    """Parse ``src`` into an :class:`Expr`.

    Only identifiers listed in ``variables`` are accepted as variables; a
    forcing is parsed with ``variables=("t",)`` so that a stray ``u`` raises
    :class:`UnknownIdentifier`.
    """
    if not src or not src.strip():
        raise ExprSyntaxError("empty expression", 0)
    p = _Parser(src, variables)
    node = p.expr()
    if p.tok.kind != "end":
        raise ExprSyntaxError(f"unexpected {p.tok.text!r}", p.tok.offset)
    if depth(node) > MAX_DEPTH:
        raise ExprSyntaxError("expression nested too deeply", 0)
    return node


def depth(e: Expr) -> int:
    # iterative so that it is safe on any tree
    best = 0
    stack = [(e, 1)]
    while stack:
        node, d = stack.pop()
        best = max(best, d)
        stack.extend((child, d + 1) for child in _children(node))
    return best


def _children(e: Expr) -> tuple[Expr, ...]:
    if isinstance(e, BinOp):
        return (e.left, e.right)
    if isinstance(e, (Neg, Call)):
        return (e.operand if isinstance(e, Neg) else e.arg,)
    return ()


def variables_of(e: Expr) -> set[str]:
    found = set()
    stack = [e]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            found.add(node.name)
        stack.extend(_children(node))
    return found


# ------------------------------------------------------------- evaluation


def evaluate(e: Expr, t, u=None):
    """Evaluate ``e`` at ``t`` (and ``u``); scalars give a float, arrays an array.

    Out-of-domain operations raise :class:`EvalDomainError` instead of
    producing NaN or infinity.
    """
    with np.errstate(all="ignore"):
        out = _eval(e, {"t": t, "u": u})
    shape = np.broadcast_shapes(np.shape(t), np.shape(u))
    if shape == ():
        return float(out)
    return np.broadcast_to(np.asarray(out, dtype=float), shape).copy()


def _check(value, what: str):
    if not np.all(np.isfinite(value)):
        raise EvalDomainError(f"{what} produced a non-finite value")
    return value


def _eval(e: Expr, env):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        value = env[e.name]
        if value is None:
            raise MissingVariable(f"variable {e.name!r} needs a value")
        return np.asarray(value, dtype=float)
    if isinstance(e, Neg):
        return -_eval(e.operand, env)
    if isinstance(e, Call):
        x = _eval(e.arg, env)
        if e.func == "log":
            if np.any(x <= 0):
                raise EvalDomainError("log of a non-positive number")
            return np.log(x)
        if e.func == "sqrt":
            if np.any(x < 0):
                raise EvalDomainError("sqrt of a negative number")
            return np.sqrt(x)
        return _check(getattr(np, e.func)(x), e.func)
    a = _eval(e.left, env)
    b = _eval(e.right, env)
    if e.op == "+":
        return _check(a + b, "addition")
    if e.op == "-":
        return _check(a - b, "subtraction")
    if e.op == "*":
        return _check(a * b, "multiplication")
    if e.op == "/":
        if np.any(b == 0):
            raise EvalDomainError("division by zero")
        return _check(a / b, "division")
    if np.any((a < 0) & (np.asarray(b) != np.round(b))):
        raise EvalDomainError("negative base with a non-integer exponent")
    if np.any((a == 0) & (np.asarray(b) < 0)):
        raise EvalDomainError("zero raised to a negative power")
    return _check(np.power(a, b), "power")


# -------------------------------------------------------- differentiation


def _num(x: float) -> Num:
    return Num(float(x))


def add(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value + b.value)
    if a == Num(0.0):
        return b
    if b == Num(0.0):
        return a
    if isinstance(b, Neg):
        return sub(a, b.operand)
    return BinOp("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value - b.value)
    if b == Num(0.0):
        return a
    if a == Num(0.0):
        return neg(b)
    if isinstance(b, Neg):
        return add(a, b.operand)
    return BinOp("-", a, b)


def neg(a: Expr) -> Expr:
    if isinstance(a, Num):
        return _num(-a.value)
    if isinstance(a, Neg):
        return a.operand
    return Neg(a)


def mul(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num):
        return _num(a.value * b.value)
    if a == Num(0.0) or b == Num(0.0):
        return Num(0.0)
    if a == Num(1.0):
        return b
    if b == Num(1.0):
        return a
    if a == Num(-1.0):
        return neg(b)
    if b == Num(-1.0):
        return neg(a)
    if isinstance(a, Neg):
        return neg(mul(a.operand, b))
    if isinstance(b, Neg):
        return neg(mul(a, b.operand))
    return BinOp("*", a, b)


def div(a: Expr, b: Expr) -> Expr:
    if isinstance(a, Num) and isinstance(b, Num) and b.value != 0.0:
        return _num(a.value / b.value)
    if a == Num(0.0) and b != Num(0.0):
        return Num(0.0)
    if b == Num(1.0):
        return a
    return BinOp("/", a, b)


def power(a: Expr, b: Expr) -> Expr:
    if b == Num(0.0):
        return Num(1.0)
    if b == Num(1.0):
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        try:
            value = a.value**b.value
        except (OverflowError, ZeroDivisionError):
            value = None
        if isinstance(value, float) and math.isfinite(value):
            return _num(value)
    return BinOp("^", a, b)


def differentiate(e: Expr, var: str = "t") -> Expr:
    """Exact derivative of ``e`` with respect to ``var`` (``"t"`` or ``"u"``).

    The result is simplified only by constant folding and 0/1 identities.
    Powers whose exponent depends on ``var`` raise
    :class:`UnsupportedDifferentiation`.
    """
    if var not in VARIABLES:
        raise ValueError(f"can only differentiate with respect to t or u, not {var!r}")
    return _diff(e, var)


def _diff(e: Expr, var: str) -> Expr:
    if isinstance(e, Num):
        return Num(0.0)
    if isinstance(e, Var):
        return Num(1.0 if e.name == var else 0.0)
    if isinstance(e, Neg):
        return neg(_diff(e.operand, var))
    if isinstance(e, Call):
        inner = _diff(e.arg, var)
        if inner == Num(0.0):
            return Num(0.0)
        x = e.arg
        outer = {
            "sin": lambda: Call("cos", x),
            "cos": lambda: neg(Call("sin", x)),
            "exp": lambda: e,
            "log": lambda: div(Num(1.0), x),
            "sqrt": lambda: div(Num(0.5), e),
        }[e.func]()
        return mul(outer, inner)
    da = _diff(e.left, var)
    db = _diff(e.right, var)
    a, b = e.left, e.right
    if e.op == "+":
        return add(da, db)
    if e.op == "-":
        return sub(da, db)
    if e.op == "*":
        return add(mul(da, b), mul(a, db))
    if e.op == "/":
        if db == Num(0.0):
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, Num(2.0)))
    # e.op == "^"
    if var in variables_of(b):
        raise UnsupportedDifferentiation(f"exponent {to_string(b)!r} depends on {var}; only constant exponents are supported")
    if da == Num(0.0):
        return Num(0.0)
    return mul(mul(b, power(a, sub(b, Num(1.0)))), da)


# --------------------------------------------------------------- printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _fmt_num(x: float) -> str:
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def to_string(e: Expr) -> str:
    """Render ``e`` with the minimum parentheses the grammar needs; re-parses to an equal-valued tree."""
    return _fmt(e)[0]


def _fmt(e: Expr) -> tuple[str, int]:
    if isinstance(e, Num):
        if e.value < 0:
            return "-" + _fmt_num(-e.value), _PREC["neg"]
        return _fmt_num(e.value), 5
    if isinstance(e, Var):
        return e.name, 5
    if isinstance(e, Call):
        return f"{e.func}({_fmt(e.arg)[0]})", 5
    if isinstance(e, Neg):
        s, p = _fmt(e.operand)
        # Neg binds looser than '^' only, so its operand needs parentheses below that
        return "-" + (s if p >= _PREC["neg"] else f"({s})"), _PREC["neg"]
    prec = _PREC[e.op]
    ls, lp = _fmt(e.left)
    rs, rp = _fmt(e.right)
    if e.op == "^":
        # base must be an atom; exponent is a factor (may be negated, or another power)
        ls = ls if lp == 5 else f"({ls})"
        rs = rs if rp >= _PREC["neg"] else f"({rs})"
        return f"{ls}^{rs}", prec
    ls = ls if lp >= prec else f"({ls})"
    # left-associative: a right operand of equal precedence needs parentheses
    rs = rs if rp > prec else f"({rs})"
    sep = f" {e.op} " if prec == 1 else e.op
    return f"{ls}{sep}{rs}", prec
