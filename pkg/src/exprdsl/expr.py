"""Arithmetic expressions for the coordinates of nonlinear maps.

Grammar (see docs/expr-grammar.md):

    expression := term (("+" | "-") term)*
    term       := unary (("*" | "/") unary)*
    unary      := ("-" | "+") unary | power
    power      := primary ("^" exponent)*
    exponent   := ("-" | "+") exponent | primary
    primary    := number | variable | function "(" args ")" | "(" expression ")"

Every binary operator is left-associative. Expressions are immutable trees
and can be shared between threads.
"""
import logging
import math
import operator
import re
from collections.abc import Iterator, Mapping
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from errors.exceptions import ExprDomainError, ExprSyntaxError, UnboundVariableError, UnknownNameError

logger = logging.getLogger(__name__)

VARIABLES = ("x", "y", "z")
UNARY_FUNCTIONS = frozenset({"sin", "cos", "abs", "exp", "log", "sqrt"})
BINARY_FUNCTIONS = frozenset({"min", "max", "mod"})
FUNCTIONS = UNARY_FUNCTIONS | BINARY_FUNCTIONS


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    arg: "Expression"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expression"
    right: "Expression"


Expression = Const | Var | Unary | Binary


class _Token(NamedTuple):
    kind: str
    text: str
    offset: int


_TOKEN_RE = re.compile(
    r"(?P<space>\s+)"
    r"|(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),])"
)

_OPERAND_START = frozenset({"number", "name", "(", "-", "+"})


def _byte_offset(source: str, index: int) -> int:
    return len(source[:index].encode("utf-8"))


def _tokenize(source: str) -> Iterator[_Token]:
    pos = 0
    while pos < len(source):
        match = _TOKEN_RE.match(source, pos)
        if match is None:
            raise ExprSyntaxError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos), _OPERAND_START)
        kind = match.lastgroup
        if kind != "space":
            yield _Token(kind, match.group(), _byte_offset(source, pos))
        pos = match.end()
    yield _Token("end", "", _byte_offset(source, len(source)))


def _describe(token: _Token) -> str:
    return "end of input" if token.kind == "end" else repr(token.text)


class _Parser:
    def __init__(self, source: str, variables: tuple[str, ...]):
        self.tokens = list(_tokenize(source))
        self.pos = 0
        self.variables = variables

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def expect(self, text: str) -> _Token:
        token = self.peek()
        if token.text != text or token.kind == "end":
            raise ExprSyntaxError(f"unexpected {_describe(token)}", token.offset, {text})
        return self.advance()

    def parse(self) -> Expression:
        node = self.expression()
        token = self.peek()
        if token.kind != "end":
            raise ExprSyntaxError(
                f"unexpected {_describe(token)}", token.offset, {"+", "-", "*", "/", "^", "end of input"}
            )
        return node

    def expression(self) -> Expression:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in ("+", "-"):
            op = self.advance().text
            node = Binary(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in ("*", "/"):
            op = self.advance().text
            node = Binary(op, node, self.unary())
        return node

    def unary(self) -> Expression:
        token = self.peek()
        if token.kind == "op" and token.text == "-":
            self.advance()
            return Unary("neg", self.unary())
        if token.kind == "op" and token.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expression:
        node = self.primary()
        while self.peek().kind == "op" and self.peek().text == "^":
            self.advance()
            node = Binary("^", node, self.exponent())
        return node

    def exponent(self) -> Expression:
        token = self.peek()
        if token.kind == "op" and token.text == "-":
            self.advance()
            return Unary("neg", self.exponent())
        if token.kind == "op" and token.text == "+":
            self.advance()
            return self.exponent()
        return self.primary()

    def primary(self) -> Expression:
        token = self.advance()

        if token.kind == "number":
            value = float(token.text)
            if not math.isfinite(value):
                raise ExprSyntaxError(f"numeric literal {token.text} overflows", token.offset)
            return Const(value)

        if token.kind == "name":
            if self.peek().text == "(" and self.peek().kind == "op":
                return self.call(token)
            if token.text in self.variables:
                return Var(token.text)
            if token.text in FUNCTIONS:
                raise ExprSyntaxError(f"function {token.text} needs arguments", self.peek().offset, {"("})
            raise UnknownNameError(token.text, token.offset)

        if token.kind == "op" and token.text == "(":
            node = self.expression()
            self.expect(")")
            return node

        raise ExprSyntaxError(f"unexpected {_describe(token)}", token.offset, {"number", "name", "(", "-"})

    def call(self, name: _Token) -> Expression:
        if name.text not in FUNCTIONS:
            raise UnknownNameError(name.text, name.offset)
        self.expect("(")
        args = [self.expression()]
        while self.peek().kind == "op" and self.peek().text == ",":
            self.advance()
            args.append(self.expression())
        closing = self.expect(")")

        arity = 1 if name.text in UNARY_FUNCTIONS else 2
        if len(args) != arity:
            raise ExprSyntaxError(
                f"{name.text} takes {arity} argument{'s' if arity > 1 else ''}, got {len(args)}", closing.offset
            )
        if arity == 1:
            return Unary(name.text, args[0])
        return Binary(name.text, args[0], args[1])


def parse(source: str, variables: tuple[str, ...] = VARIABLES) -> Expression:
    """Parse source text into an expression tree.

    Raises ExprSyntaxError (with byte offset and expected tokens) or
    UnknownNameError for identifiers outside `variables` and the function set.
    """
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    return _Parser(source, tuple(variables)).parse()


def free_variables(expr: Expression) -> frozenset[str]:
    match expr:
        case Const():
            return frozenset()
        case Var(name=name):
            return frozenset({name})
        case Unary(arg=arg):
            return free_variables(arg)
        case Binary(left=left, right=right):
            return free_variables(left) | free_variables(right)
    raise TypeError(f"not an expression: {expr!r}")


def to_source(expr: Expression) -> str:
    """Print an expression fully parenthesized; parse(to_source(e)) == e."""
    match expr:
        case Const(value=value):
            return repr(float(value))
        case Var(name=name):
            return name
        case Unary(op="neg", arg=arg):
            return f"(-{to_source(arg)})"
        case Unary(op=op, arg=arg):
            return f"{op}({to_source(arg)})"
        case Binary(op=op, left=left, right=right) if op in BINARY_FUNCTIONS:
            return f"{op}({to_source(left)}, {to_source(right)})"
        case Binary(op=op, left=left, right=right):
            return f"({to_source(left)} {op} {to_source(right)})"
    raise TypeError(f"not an expression: {expr!r}")


_SCALAR_UNARY = {
    "neg": operator.neg,
    "sin": math.sin,
    "cos": math.cos,
    "abs": abs,
    "exp": math.exp,
    "log": math.log,
    "sqrt": math.sqrt,
}

_SCALAR_BINARY = {
    "+": operator.add,
    "-": operator.sub,
    "*": operator.mul,
    "/": operator.truediv,
    "^": math.pow,
    "min": min,
    "max": max,
    "mod": operator.mod,
}

_ARRAY_UNARY = {
    "neg": np.negative,
    "sin": np.sin,
    "cos": np.cos,
    "abs": np.abs,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}

_ARRAY_BINARY = {
    "+": np.add,
    "-": np.subtract,
    "*": np.multiply,
    "/": np.divide,
    "^": np.power,
    "min": np.minimum,
    "max": np.maximum,
    "mod": np.mod,
}


def _checked(op: str, result: float) -> float:
    if not math.isfinite(result):
        raise ExprDomainError(f"{op} produced a non-finite value")
    return result


def evaluate(expr: Expression, env: Mapping[str, float]) -> float:
    """Evaluate at one point in IEEE double precision.

    Domain errors (log of a nonpositive number, division by zero, overflow)
    raise ExprDomainError instead of returning NaN or infinity.
    """
    match expr:
        case Const(value=value):
            return value
        case Var(name=name):
            if name not in env:
                raise UnboundVariableError(name)
            return float(env[name])
        case Unary(op=op, arg=arg):
            value = evaluate(arg, env)
            try:
                return _checked(op, float(_SCALAR_UNARY[op](value)))
            except (ValueError, OverflowError, ZeroDivisionError) as exc:
                raise ExprDomainError(f"{op}({value!r}) is undefined: {exc}") from exc
        case Binary(op=op, left=left, right=right):
            a = evaluate(left, env)
            b = evaluate(right, env)
            try:
                return _checked(op, float(_SCALAR_BINARY[op](a, b)))
            except (ValueError, OverflowError, ZeroDivisionError) as exc:
                raise ExprDomainError(f"{op}({a!r}, {b!r}) is undefined: {exc}") from exc
    raise TypeError(f"not an expression: {expr!r}")


def _first_bad(values: np.ndarray) -> int | None:
    bad = ~np.isfinite(values)
    if not bad.any():
        return None
    return int(np.flatnonzero(np.atleast_1d(bad))[0])


def evaluate_array(expr: Expression, env: Mapping[str, np.ndarray]) -> np.ndarray:
    """Vectorized evaluate over equally shaped coordinate arrays.

    The first offending element of a domain error is reported through
    ExprDomainError.index.
    """
    arrays = {name: np.asarray(value, dtype=float) for name, value in env.items()}
    shape = np.broadcast_shapes(*(a.shape for a in arrays.values())) if arrays else ()

    def walk(node: Expression) -> np.ndarray:
        match node:
            case Const(value=value):
                return np.asarray(value, dtype=float)
            case Var(name=name):
                if name not in arrays:
                    raise UnboundVariableError(name)
                return arrays[name]
            case Unary(op=op, arg=arg):
                with np.errstate(all="ignore"):
                    result = _ARRAY_UNARY[op](walk(arg))
            case Binary(op=op, left=left, right=right):
                a, b = walk(left), walk(right)
                with np.errstate(all="ignore"):
                    result = _ARRAY_BINARY[op](a, b)
            case _:
                raise TypeError(f"not an expression: {node!r}")
        index = _first_bad(np.broadcast_to(result, shape))
        if index is not None:
            raise ExprDomainError(f"{op} produced a non-finite value", index=index)
        return result

    return np.array(np.broadcast_to(walk(expr), shape), dtype=float)
