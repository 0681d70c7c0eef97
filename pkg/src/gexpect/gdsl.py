"""Tiny arithmetic expression language for defining drivers and claims in config files.

Grammar (normative)::

    expr   := term (("+" | "-") term)*
    term   := factor (("*" | "/") factor)*
    factor := ["-"] atom
    atom   := number | ident | ident "(" expr ("," expr)* ")" | "(" expr ")"

Numbers are decimals with optional fraction and exponent.  Identifiers are
ASCII.  Driver expressions may reference ``t``, ``y`` and ``z1..zd``; claim
expressions reference ``x`` (d = 1, the terminal Brownian value) or
``x1..xd`` (d > 1).  Functions: abs, min, max, sin, cos, sqrt, exp and
pos, where pos(a) = max(a, 0).  There are no user constants or bindings.

Evaluation is pure and numpy-vectorized; every transcendental comes from
numpy, so repeated runs on one build are bit-identical.  Division by zero
is an error, never an infinity: silent non-finite values would corrupt
backward induction downstream.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

import numpy as np

from .model import Claim, EvaluationError, GeneratorFlags, GeneratorSpec

MAX_DEPTH = 64

# function name -> (min arity, max arity or None for unbounded)
_FUNCTIONS = {
    "abs": (1, 1), "sin": (1, 1), "cos": (1, 1), "sqrt": (1, 1),
    "exp": (1, 1), "pos": (1, 1), "min": (2, None), "max": (2, None),
}


class ParseError(ValueError):
    """Syntax or vocabulary error, carrying the byte offset and expected tokens."""

    def __init__(self, message: str, offset: int, expected=()):
        self.offset = offset
        self.expected = tuple(sorted(expected))
        detail = f"{message} at byte {offset}"
        if self.expected:
            detail += " (expected " + " | ".join(self.expected) + ")"
        super().__init__(detail)


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Unary:
    op: str
    operand: "Expr"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str
    args: tuple


Expr = Union[Num, Var, Unary, Binary, Call]

_TOKEN_RE = re.compile(r"""
    (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z][A-Za-z0-9]*)
  | (?P<op>[-+*/(),])
  | (?P<ws>\s+)
""", re.VERBOSE)


def _byte_offset(src: str, pos: int) -> int:
    return len(src[:pos].encode("utf-8"))


def _tokenize(src: str):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ParseError(f"unexpected character {src[pos]!r}",
                             _byte_offset(src, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), _byte_offset(src, pos)))
        pos = m.end()
    tokens.append(("eof", "", _byte_offset(src, len(src))))
    return tokens


class _Parser:
    def __init__(self, src: str, variables: set, var_hint: str):
        self.src = src
        self.tokens = _tokenize(src)
        self.i = 0
        self.variables = variables
        self.var_hint = var_hint  # used to word index-out-of-range errors

    def peek(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect_op(self, text):
        kind, value, off = self.peek()
        if kind == "op" and value == text:
            return self.advance()
        raise ParseError(f"unexpected {value!r}" if value else "unexpected end of input",
                         off, expected=(repr(text),))

    def parse(self) -> Expr:
        tree = self.expr(1)
        kind, value, off = self.peek()
        if kind != "eof":
            raise ParseError(f"unexpected trailing {value!r}", off,
                             expected=("'+'", "'-'", "'*'", "'/'", "end of input"))
        return tree

    def expr(self, depth) -> Expr:
        node = self.term(depth)
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "+-":
                self.advance()
                node = Binary(value, node, self.term(depth))
            else:
                return node

    def term(self, depth) -> Expr:
        node = self.factor(depth)
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value in "*/":
                self.advance()
                node = Binary(value, node, self.factor(depth))
            else:
                return node

    def factor(self, depth) -> Expr:
        kind, value, _ = self.peek()
        if kind == "op" and value == "-":
            self.advance()
            return Unary("-", self.atom(depth))
        return self.atom(depth)

    def atom(self, depth) -> Expr:
        if depth > MAX_DEPTH:
            raise ParseError(f"expression nesting exceeds depth {MAX_DEPTH}",
                             self.peek()[2])
        kind, value, off = self.advance()
        if kind == "number":
            return Num(float(value))
        if kind == "ident":
            nxt_kind, nxt_value, _ = self.peek()
            if nxt_kind == "op" and nxt_value == "(":
                return self.call(value, off, depth)
            return self.variable(value, off)
        if kind == "op" and value == "(":
            node = self.expr(depth + 1)
            self.expect_op(")")
            return node
        raise ParseError(f"unexpected {value!r}" if value else "unexpected end of input",
                         off, expected=("number", "identifier", "'('", "'-'"))

    def call(self, name, off, depth) -> Expr:
        if name not in _FUNCTIONS:
            raise ParseError(f"unknown function {name!r}", off,
                             expected=tuple(sorted(_FUNCTIONS)))
        self.expect_op("(")
        args = [self.expr(depth + 1)]
        while True:
            kind, value, _ = self.peek()
            if kind == "op" and value == ",":
                self.advance()
                args.append(self.expr(depth + 1))
            else:
                break
        self.expect_op(")")
        lo, hi = _FUNCTIONS[name]
        if len(args) < lo or (hi is not None and len(args) > hi):
            arity = str(lo) if hi == lo else f"at least {lo}"
            raise ParseError(f"{name} takes {arity} argument(s), got {len(args)}", off)
        return Call(name, tuple(args))

    def variable(self, name, off) -> Expr:
        if name in self.variables:
            return Var(name)
        m = re.fullmatch(r"([xz])(\d+)", name)
        if m and any(v.startswith(m.group(1)) or v == m.group(1) for v in self.variables):
            raise ParseError(
                f"{m.group(1)}-index out of range: {name!r} ({self.var_hint})", off)
        raise ParseError(f"unknown identifier {name!r}", off,
                         expected=tuple(sorted(self.variables)))


def _generator_alphabet(d: int) -> set:
    return {"t", "y"} | {f"z{k}" for k in range(1, d + 1)}


def _claim_alphabet(d: int) -> set:
    return {"x"} if d == 1 else {f"x{k}" for k in range(1, d + 1)}


def parse_expr(src: str, variables: set, var_hint: str = "") -> Expr:
    if not src or not src.strip():
        raise ParseError("empty expression", 0)
    return _Parser(src, variables, var_hint).parse()


def evaluate(expr: Expr, env: dict):
    """Evaluate an expression tree against an environment of numpy-broadcastable values."""
    with np.errstate(over="ignore", invalid="ignore"):
        return _eval(expr, env)


def _eval(expr: Expr, env: dict):
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        return env[expr.name]
    if isinstance(expr, Unary):
        return -_eval(expr.operand, env)
    if isinstance(expr, Binary):
        a = _eval(expr.left, env)
        b = _eval(expr.right, env)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if np.any(np.asarray(b) == 0.0):
            raise EvaluationError("division by zero during expression evaluation")
        return a / b
    if isinstance(expr, Call):
        args = [_eval(a, env) for a in expr.args]
        if expr.func == "abs":
            return np.abs(args[0])
        if expr.func == "sin":
            return np.sin(args[0])
        if expr.func == "cos":
            return np.cos(args[0])
        if expr.func == "sqrt":
            if np.any(np.asarray(args[0]) < 0.0):
                raise EvaluationError("sqrt of a negative value")
            return np.sqrt(args[0])
        if expr.func == "exp":
            return np.exp(args[0])
        if expr.func == "pos":
            return np.maximum(args[0], 0.0)
        if expr.func == "min":
            out = args[0]
            for a in args[1:]:
                out = np.minimum(out, a)
            return out
        out = args[0]
        for a in args[1:]:
            out = np.maximum(out, a)
        return out
    raise TypeError(f"not an expression node: {expr!r}")


_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def pretty(expr: Expr) -> str:
    """Render a tree back to source; re-parsing gives a structurally identical tree."""
    return _pretty(expr, 0)


def _pretty(expr: Expr, parent_prec: int, right_side: bool = False) -> str:
    if isinstance(expr, Num):
        return repr(expr.value)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Call):
        return expr.func + "(" + ", ".join(_pretty(a, 0) for a in expr.args) + ")"
    if isinstance(expr, Unary):
        inner = expr.operand
        text = "-" + (_pretty(inner, 0) if isinstance(inner, (Num, Var, Call))
                      else "(" + _pretty(inner, 0) + ")")
        # a unary factor binds tighter than * and /; never needs outer parens
        return text
    prec = _PREC[expr.op]
    left = _pretty(expr.left, prec, right_side=False)
    right = _pretty(expr.right, prec, right_side=True)
    text = f"{left} {expr.op} {right}"
    # same-precedence right children must stay grouped to keep left associativity
    if prec < parent_prec or (prec == parent_prec and right_side):
        return "(" + text + ")"
    return text


def parse_generator(src: str, d: int, *, lipschitz: float,
                    flags=None) -> GeneratorSpec:
    """Parse a driver expression over {t, y, z1..zd} into a GeneratorSpec.

    The Lipschitz bound is a caller declaration, not inferred; it is later
    falsified (or not) by ``validate_assumptions``.
    """
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    tree = parse_expr(src, _generator_alphabet(d),
                      var_hint=f"driver dimension is {d}")
    canonical = pretty(tree)

    def body(t, y, z):
        z = np.asarray(z, dtype=float)
        env = {"t": t, "y": y}
        for k in range(d):
            env[f"z{k + 1}"] = z[k]
        return evaluate(tree, env)

    return GeneratorSpec(body=body, dimension=d, lipschitz=lipschitz,
                         flags=flags or GeneratorFlags(), source=canonical)


def parse_claim(src: str, d: int, *, lipschitz: float = None) -> Claim:
    """Parse a claim expression over {x} (d = 1) or {x1..xd} into a terminal claim."""
    if d < 1:
        raise ValueError(f"d must be >= 1, got {d}")
    hint = "claim dimension is 1; use plain x" if d == 1 else f"claim dimension is {d}"
    tree = parse_expr(src, _claim_alphabet(d), var_hint=hint)
    canonical = pretty(tree)

    if d == 1:
        def terminal(x):
            return evaluate(tree, {"x": np.asarray(x, dtype=float)})
    else:
        def terminal(x):
            x = np.asarray(x, dtype=float)
            env = {f"x{k + 1}": x[k] for k in range(d)}
            return evaluate(tree, env)

    return Claim(kind="terminal_function", terminal_function=terminal,
                 lipschitz=lipschitz, source=canonical)
