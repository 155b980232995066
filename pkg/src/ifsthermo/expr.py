"""Small arithmetic expression language for maps, weights and potentials.

Grammar (whitespace is ignored)::

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?
    atom    := NUMBER | VARIABLE | CONST | FUNC "(" expr ("," expr)* ")"
             | "(" expr ")"
    NUMBER  := digits ["." digits] [("e" | "E") ["+" | "-"] digits]
    VARIABLE:= "x1" | "x2" | ... | "x"      ("x" only when the dimension is 1)
    CONST   := "pi" | "e"
    FUNC    := sin | cos | exp | ln | abs | sqrt   (one argument)
             | min | max                           (two arguments)

``^`` binds tighter than unary minus, so ``-x^2`` is ``-(x^2)``; ``^`` is
right associative, the other binary operators are left associative.
Literals are stored as non-negative floats; a negative number is a ``Neg``
node.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

import numpy as np

__all__ = [
    "Expr", "Num", "Var", "Neg", "BinOp", "Call",
    "ExprError", "ExprSyntaxError", "ExprDomainError",
    "parse", "to_string", "evaluate", "evaluate_many", "substitute",
    "to_python", "num_vars", "FUNCTIONS",
]


class ExprError(Exception):
    pass


class ExprSyntaxError(ExprError, ValueError):
    def __init__(self, message: str, position: int | None = None, source: str | None = None):
        self.position = position
        self.source = source
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)


class ExprDomainError(ExprError, ArithmeticError):
    def __init__(self, message: str, subexpr: "Expr"):
        self.subexpr = subexpr
        super().__init__(f"{message} in '{to_string(subexpr)}'")


@dataclass(frozen=True)
class Num:
    value: float

    def __post_init__(self):
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError(f"literal must be finite and non-negative, got {self.value!r}")

    def __call__(self, points):
        return evaluate_many(self, points)


@dataclass(frozen=True)
class Var:
    index: int  # zero based: x1 -> 0

    def __call__(self, points):
        return evaluate_many(self, points)


@dataclass(frozen=True)
class Neg:
    operand: "Expr"

    def __call__(self, points):
        return evaluate_many(self, points)


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def __call__(self, points):
        return evaluate_many(self, points)


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple

    def __call__(self, points):
        return evaluate_many(self, points)


Expr = Union[Num, Var, Neg, BinOp, Call]

FUNCTIONS = {
    "sin": 1, "cos": 1, "exp": 1, "ln": 1, "abs": 1, "sqrt": 1,
    "min": 2, "max": 2,
}
CONSTANTS = {"pi": math.pi, "e": math.e}

_TOKEN = re.compile(
    r"\s*(?:"
    r"(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),])"
    r")"
)
_VAR = re.compile(r"x([1-9][0-9]*)$")


def _tokenize(source: str):
    tokens = []
    pos = 0
    n = len(source)
    while pos < n:
        if source[pos:].strip() == "":
            break
        m = _TOKEN.match(source, pos)
        if m is None or m.end() == pos:
            start = pos + (len(source[pos:]) - len(source[pos:].lstrip()))
            raise ExprSyntaxError(f"unexpected character {source[start]!r}", start, source)
        kind = m.lastgroup
        start = m.start(kind)
        tokens.append((kind, m.group(kind), start))
        pos = m.end()
    tokens.append(("end", "", n))
    return tokens


class _Parser:
    def __init__(self, source: str, dim: int | None):
        self.source = source
        self.dim = dim
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return ExprSyntaxError(message, tok[2], self.source)

    def expect(self, value):
        tok = self.peek()
        if tok[0] != "op" or tok[1] != value:
            shown = tok[1] if tok[0] != "end" else "end of input"
            raise self.error(f"expected {value!r}, found {shown!r}")
        return self.advance()

    def parse(self):
        node = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise self.error(f"unexpected token {tok[1]!r}")
        return node

    def expr(self):
        node = self.term()
        while self.peek()[0] == "op" and self.peek()[1] in "+-":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.peek()[0] == "op" and self.peek()[1] in "*/":
            op = self.advance()[1]
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.power()

    def power(self):
        base = self.atom()
        tok = self.peek()
        if tok[0] == "op" and tok[1] == "^":
            self.advance()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        tok = self.advance()
        kind, text, pos = tok
        if kind == "num":
            return Num(float(text))
        if kind == "name":
            nxt = self.peek()
            if nxt[0] == "op" and nxt[1] == "(":
                if text not in FUNCTIONS:
                    raise ExprSyntaxError(f"unknown function {text!r}", pos, self.source)
                self.advance()
                args = [self.expr()]
                while self.peek()[0] == "op" and self.peek()[1] == ",":
                    self.advance()
                    args.append(self.expr())
                self.expect(")")
                if len(args) != FUNCTIONS[text]:
                    raise ExprSyntaxError(
                        f"{text} takes {FUNCTIONS[text]} argument(s), got {len(args)}",
                        pos, self.source)
                return Call(text, tuple(args))
            if text in FUNCTIONS:
                raise ExprSyntaxError(f"function {text!r} needs arguments", pos, self.source)
            if text in CONSTANTS:
                return Num(CONSTANTS[text])
            return self.variable(text, pos)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect(")")
            return node
        shown = text if kind != "end" else "end of input"
        raise ExprSyntaxError(f"unexpected {shown!r}", pos, self.source)

    def variable(self, text, pos):
        if text == "x":
            if self.dim not in (None, 1):
                raise ExprSyntaxError("'x' is only accepted in dimension 1; use x1..xd", pos, self.source)
            return Var(0)
        m = _VAR.match(text)
        if m is None:
            raise ExprSyntaxError(f"unknown identifier {text!r}", pos, self.source)
        index = int(m.group(1)) - 1
        if self.dim is not None and index >= self.dim:
            raise ExprSyntaxError(f"unknown identifier {text!r} in dimension {self.dim}", pos, self.source)
        return Var(index)


def parse(source: str, dim: int | None = None) -> Expr:
    """Parse ``source`` into an AST.

    ``dim`` restricts the admissible variables to ``x1..x{dim}``; ``None``
    accepts any ``xk``.
    """
    if not isinstance(source, str) or not source.strip():
        raise ExprSyntaxError("empty expression", 0, source if isinstance(source, str) else None)
    return _Parser(source, dim).parse()


# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 4}
_NEG_PREC = 3
_ATOM_PREC = 5


def _prec(e) -> int:
    if isinstance(e, BinOp):
        return _PREC[e.op]
    if isinstance(e, Neg):
        return _NEG_PREC
    return _ATOM_PREC


def to_string(e: Expr) -> str:
    """Render with the minimal parentheses needed for ``parse`` to give back ``e``."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return f"x{e.index + 1}"
    if isinstance(e, Neg):
        inner = to_string(e.operand)
        if _prec(e.operand) < _NEG_PREC:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Call):
        return f"{e.name}({', '.join(to_string(a) for a in e.args)})"
    if isinstance(e, BinOp):
        p = _PREC[e.op]
        left, right = to_string(e.left), to_string(e.right)
        if e.op == "^":
            if _prec(e.left) <= p:
                left = f"({left})"
            if _prec(e.right) < p:
                right = f"({right})"
            return f"{left}^{right}"
        if _prec(e.left) < p:
            left = f"({left})"
        if _prec(e.right) <= p:
            right = f"({right})"
        return f"{left} {e.op} {right}"
    raise TypeError(f"not an expression node: {e!r}")


def num_vars(e: Expr) -> int:
    """Smallest dimension in which ``e`` is well defined."""
    if isinstance(e, Var):
        return e.index + 1
    if isinstance(e, Neg):
        return num_vars(e.operand)
    if isinstance(e, BinOp):
        return max(num_vars(e.left), num_vars(e.right))
    if isinstance(e, Call):
        return max(num_vars(a) for a in e.args)
    return 0


def substitute(e: Expr, replacements) -> Expr:
    """Replace variable ``x{k+1}`` by ``replacements[k]`` (composition)."""
    if isinstance(e, Var):
        return replacements[e.index]
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, replacements))
    if isinstance(e, BinOp):
        return BinOp(e.op, substitute(e.left, replacements), substitute(e.right, replacements))
    if isinstance(e, Call):
        return Call(e.name, tuple(substitute(a, replacements) for a in e.args))
    return e


# evaluation

_NP_FUNCS = {
    "sin": np.sin, "cos": np.cos, "exp": np.exp, "ln": np.log,
    "abs": np.abs, "sqrt": np.sqrt, "min": np.minimum, "max": np.maximum,
}


def _check(values, node, message):
    if not np.all(np.isfinite(values)):
        raise ExprDomainError(message, node)
    return values


def _eval(e, cols):
    if isinstance(e, Num):
        return np.float64(e.value)
    if isinstance(e, Var):
        if e.index >= len(cols):
            raise ExprDomainError(f"variable x{e.index + 1} not available in dimension {len(cols)}", e)
        return cols[e.index]
    if isinstance(e, Neg):
        return -_eval(e.operand, cols)
    if isinstance(e, BinOp):
        a = _eval(e.left, cols)
        b = _eval(e.right, cols)
        if e.op == "+":
            return _check(a + b, e, "non-finite sum")
        if e.op == "-":
            return _check(a - b, e, "non-finite difference")
        if e.op == "*":
            return _check(a * b, e, "non-finite product")
        if e.op == "/":
            if np.any(b == 0):
                raise ExprDomainError("division by zero", e)
            return _check(a / b, e, "non-finite quotient")
        return _check(np.power(a, b), e, "undefined power")
    if isinstance(e, Call):
        args = [_eval(a, cols) for a in e.args]
        if e.name == "ln" and np.any(args[0] <= 0):
            raise ExprDomainError("logarithm of a non-positive number", e)
        if e.name == "sqrt" and np.any(args[0] < 0):
            raise ExprDomainError("square root of a negative number", e)
        return _check(_NP_FUNCS[e.name](*args), e, f"non-finite {e.name}")
    raise TypeError(f"not an expression node: {e!r}")


def evaluate_many(e: Expr, points) -> np.ndarray:
    """Evaluate ``e`` at each row of ``points`` (shape ``(N, d)``, or ``(N,)`` for d=1)."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    cols = [pts[:, k] for k in range(pts.shape[1])]
    with np.errstate(all="ignore"):
        out = _eval(e, cols)
    return np.broadcast_to(np.asarray(out, dtype=float), (pts.shape[0],)).copy()


def evaluate(e: Expr, point) -> float:
    """Evaluate at one point; a scalar is accepted when d=1."""
    p = np.atleast_1d(np.asarray(point, dtype=float))
    if p.ndim != 1:
        raise ValueError("evaluate expects a single point; use evaluate_many for arrays")
    return float(evaluate_many(e, p[None, :])[0])


# code generation (scalar source, used by the compiled chaos game)

_PY_FUNCS = {
    "sin": "math.sin", "cos": "math.cos", "exp": "math.exp", "ln": "math.log",
    "abs": "abs", "sqrt": "math.sqrt", "min": "min", "max": "max",
}


def to_python(e: Expr) -> str:
    """Scalar Python source using ``math``; variables are named ``x1, x2, ...``."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return f"x{e.index + 1}"
    if isinstance(e, Neg):
        return f"(-{to_python(e.operand)})"
    if isinstance(e, BinOp):
        op = "**" if e.op == "^" else e.op
        return f"({to_python(e.left)} {op} {to_python(e.right)})"
    if isinstance(e, Call):
        return f"{_PY_FUNCS[e.name]}({', '.join(to_python(a) for a in e.args)})"
    raise TypeError(f"not an expression node: {e!r}")
