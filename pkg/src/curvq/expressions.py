"""Scalar expression language for metric components and test fields.

Expressions are built from real constants, coordinate variables ``x1..xn``,
the unary functions sin, cos, tan, exp, log, sqrt, sinh, cosh, tanh, the
binary operators ``+ - * /``, unary negation, and ``^`` with a constant
exponent.  The grammar (EBNF, also reproduced in the README):

    expr     = term { ("+" | "-") term } ;
    term     = factor { ("*" | "/") factor } ;
    factor   = "-" factor | power ;
    power    = atom { "^" exponent } ;
    exponent = [ "-" ] NUMBER ;
    atom     = NUMBER | "pi" | VAR | FUNC "(" expr ")" | "(" expr ")" ;
    VAR      = "x" DIGITS ;
    FUNC     = "sin" | "cos" | "tan" | "exp" | "log" | "sqrt"
             | "sinh" | "cosh" | "tanh" ;

Binary operators of equal precedence associate to the left and ``^`` binds
tighter than unary minus, so ``-x1^2`` parses as ``-(x1^2)``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

__all__ = [
    "Expr",
    "Const",
    "Var",
    "Neg",
    "BinOp",
    "Pow",
    "Func",
    "ParseError",
    "FUNCTIONS",
    "parse_expression",
    "expr_to_string",
]

FUNCTIONS = ("sin", "cos", "tan", "exp", "log", "sqrt", "sinh", "cosh", "tanh")


class ParseError(ValueError):
    """Syntax or validation error, carrying the offending position."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class Expr:
    """Base class for expression nodes.  Nodes are immutable."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    index: int  # 1-based coordinate index


@dataclass(frozen=True)
class Neg(Expr):
    arg: Expr


@dataclass(frozen=True)
class BinOp(Expr):
    op: str  # one of "+", "-", "*", "/"
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Pow(Expr):
    base: Expr
    exponent: float


@dataclass(frozen=True)
class Func(Expr):
    name: str
    arg: Expr


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<num>\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(f"unexpected character {stripped[0]!r}", pos)
        if m.group("num") is not None:
            # re-grab the full numeric literal including any exponent part
            tokens.append(("num", text[m.start() : m.end()].strip(), m.start()))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident"), m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


_VAR_RE = re.compile(r"^x(\d+)$")


class _Parser:
    def __init__(self, text: str, n: int):
        self.text = text
        self.n = n
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, symbol: str):
        kind, val, pos = self.peek()
        if kind != "op" or val != symbol:
            raise ParseError(f"expected {symbol!r}", pos)
        return self.advance()

    def parse(self) -> Expr:
        node = self.expr()
        kind, val, pos = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected token {val!r}", pos)
        return node

    def expr(self) -> Expr:
        node = self.term()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("+", "-"):
                self.advance()
                node = BinOp(val, node, self.term())
            else:
                return node

    def term(self) -> Expr:
        node = self.factor()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val in ("*", "/"):
                self.advance()
                node = BinOp(val, node, self.factor())
            else:
                return node

    def factor(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Expr:
        node = self.atom()
        while True:
            kind, val, _ = self.peek()
            if kind == "op" and val == "^":
                self.advance()
                node = Pow(node, self.exponent())
            else:
                return node

    def exponent(self) -> float:
        kind, val, pos = self.peek()
        sign = 1.0
        if kind == "op" and val == "-":
            self.advance()
            sign = -1.0
            kind, val, pos = self.peek()
        if kind != "num":
            raise ParseError("exponent must be a numeric constant", pos)
        self.advance()
        return sign * float(val)

    def atom(self) -> Expr:
        kind, val, pos = self.advance()
        if kind == "num":
            return Const(float(val))
        if kind == "ident":
            if val == "pi":
                return Const(math.pi)
            m = _VAR_RE.match(val)
            if m:
                idx = int(m.group(1))
                if not 1 <= idx <= self.n:
                    raise ParseError(
                        f"variable x{idx} out of range for dimension {self.n}", pos
                    )
                return Var(idx)
            if val in FUNCTIONS:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Func(val, arg)
            raise ParseError(f"unknown identifier {val!r}", pos)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "end":
            raise ParseError("unexpected end of input", pos)
        raise ParseError(f"unexpected token {val!r}", pos)


def parse_expression(text: str, n: int) -> Expr:
    """Parse ``text`` into an expression tree over coordinates x1..xn.

    Raises :class:`ParseError` with a character position on malformed input,
    unknown identifiers, or variable indices exceeding ``n``.
    """
    if not text or not text.strip():
        raise ParseError("empty expression", 0)
    tree = _Parser(text, n).parse()
    _check_static_domains(tree)
    return tree


def _static_const(node: Expr):
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Neg):
        inner = _static_const(node.arg)
        return None if inner is None else -inner
    return None


def _check_static_domains(node: Expr) -> None:
    """Reject log/sqrt applied to a statically non-positive constant."""
    if isinstance(node, Func):
        cval = _static_const(node.arg)
        if cval is not None:
            if node.name == "log" and cval <= 0:
                raise ParseError(f"log of non-positive constant {cval}", 0)
            if node.name == "sqrt" and cval < 0:
                raise ParseError(f"sqrt of negative constant {cval}", 0)
        _check_static_domains(node.arg)
    elif isinstance(node, Neg):
        _check_static_domains(node.arg)
    elif isinstance(node, BinOp):
        _check_static_domains(node.left)
        _check_static_domains(node.right)
    elif isinstance(node, Pow):
        _check_static_domains(node.base)


# ---------------------------------------------------------------------------
# printing

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(node: Expr) -> int:
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return _PREC["neg"]
    if isinstance(node, Pow):
        return _PREC["^"]
    return _PREC["atom"]


def _fmt_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def expr_to_string(node: Expr) -> str:
    """Render an expression tree back to parseable text."""
    if isinstance(node, Const):
        v = node.value
        return f"({_fmt_const(v)})" if v < 0 else _fmt_const(v)
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Func):
        return f"{node.name}({expr_to_string(node.arg)})"
    if isinstance(node, Neg):
        inner = expr_to_string(node.arg)
        if _prec(node.arg) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(node, Pow):
        base = expr_to_string(node.base)
        if _prec(node.base) <= _PREC["^"]:
            base = f"({base})"
        if node.exponent < 0:
            return f"{base}^-{_fmt_const(-node.exponent)}"
        return f"{base}^{_fmt_const(node.exponent)}"
    if isinstance(node, BinOp):
        lhs = expr_to_string(node.left)
        rhs = expr_to_string(node.right)
        if _prec(node.left) < _PREC[node.op]:
            lhs = f"({lhs})"
        # left associativity: parenthesize right operand at equal precedence
        if _prec(node.right) <= _PREC[node.op]:
            rhs = f"({rhs})"
        return f"{lhs} {node.op} {rhs}"
    raise TypeError(f"not an expression node: {node!r}")
