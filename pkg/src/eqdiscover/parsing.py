"""Lexer and recursive-descent parser for equation strings.

Grammar (whitespace-insensitive)::

    expr   := term  (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?          # right-associative
    atom   := NUMBER | IDENT | IDENT '(' expr ')' | '(' expr ')'

Precedence is ``^`` > unary minus > ``*``/``/`` > ``+``/``-`` with
left-associative binary chains.  ``**`` is accepted as an alias for ``^``
since model output frequently uses Python notation.

Constant tokens: ``const`` and ``c<digits>`` (only meaningful in libraries
with ``allows_const``) each introduce a fresh placeholder; placeholders are
indexed consecutively in reading order, so repeated ``const`` tokens are
distinct constants.

Numeric literals are subject to the library's policy: in constant-free
(PDE) libraries they are stripped to 1 because coefficients belong to the
regression; in constant-bearing (ODE) libraries they become placeholders
initialized at the literal value.  Exponent positions are exempt either
way.  Pass ``literals="keep"`` to bypass the policy (dataset ground truths
are built this way).
"""

from __future__ import annotations

import re

from .errors import ExpressionSyntaxError, LibraryViolationError
from .expressions import (
    Binary,
    Const,
    Expression,
    Literal,
    SymbolLibrary,
    Unary,
    UNARY_FUNCS,
    Var,
    validate,
)

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?|\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>\*\*|[-+*/^()]))"
)

_CONST_RE = re.compile(r"c\d+$")


def tokenize(source: str) -> list[tuple[str, str]]:
    """Split a source string into (kind, text) tokens; raises on junk."""
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if not m:
            rest = source[pos:].strip()
            if not rest:
                break
            raise ExpressionSyntaxError(f"unexpected character {rest[0]!r} at position {pos}")
        if m.group("number") is not None:
            tokens.append(("number", m.group("number")))
        elif m.group("ident") is not None:
            tokens.append(("ident", m.group("ident")))
        else:
            op = m.group("op")
            tokens.append(("op", "^" if op == "**" else op))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens, lib: SymbolLibrary):
        self.tokens = tokens
        self.lib = lib
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, None)

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def expect_op(self, symbol):
        kind, text = self.next()
        if kind != "op" or text != symbol:
            raise ExpressionSyntaxError(f"expected {symbol!r}, found {text!r}")

    def parse(self):
        node = self.expr()
        kind, text = self.peek()
        if kind is not None:
            raise ExpressionSyntaxError(f"unexpected trailing token {text!r}")
        return node

    def expr(self):
        node = self.term()
        while True:
            kind, text = self.peek()
            if kind == "op" and text in "+-":
                self.next()
                node = Binary("add" if text == "+" else "sub", node, self.term())
            else:
                return node

    def term(self):
        node = self.unary()
        while True:
            kind, text = self.peek()
            if kind == "op" and text in "*/":
                self.next()
                node = Binary("mul" if text == "*" else "div", node, self.unary())
            else:
                return node

    def unary(self):
        kind, text = self.peek()
        if kind == "op" and text == "-":
            self.next()
            child = self.unary()
            if isinstance(child, Literal):
                return Literal(-child.value)
            return Unary("neg", child)
        return self.power()

    def power(self):
        base = self.atom()
        kind, text = self.peek()
        if kind == "op" and text == "^":
            self.next()
            return Binary("pow", base, self.unary())
        return base

    def atom(self):
        kind, text = self.next()
        if kind == "number":
            return Literal(float(text))
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        if kind == "ident":
            nk, nt = self.peek()
            if nk == "op" and nt == "(":
                if text not in UNARY_FUNCS:
                    raise ExpressionSyntaxError(f"unknown function {text!r}")
                self.next()
                child = self.expr()
                self.expect_op(")")
                return Unary(text, child)
            if self.lib.allows_const and (text == "const" or _CONST_RE.match(text)):
                return Const(-1)  # indexed later, in reading order
            return Var(text)
        if kind is None:
            raise ExpressionSyntaxError("unexpected end of input")
        raise ExpressionSyntaxError(f"unexpected token {text!r}")


def _apply_literal_policy(node, policy, counter, in_exponent=False):
    """Reindex constants in reading order and apply the literal policy."""
    if isinstance(node, Const):
        idx = counter[0]
        counter[0] += 1
        return Const(idx, node.init)
    if isinstance(node, Literal):
        if in_exponent or policy == "keep":
            return node
        if policy == "strip":
            return Literal(1.0 if node.value >= 0 else -1.0)
        idx = counter[0]  # placeholder initialized at the literal value
        counter[0] += 1
        return Const(idx, init=float(node.value))
    if isinstance(node, Unary):
        return Unary(node.op, _apply_literal_policy(node.child, policy, counter, in_exponent))
    if isinstance(node, Binary):
        left = _apply_literal_policy(node.left, policy, counter, in_exponent)
        right = _apply_literal_policy(
            node.right, policy, counter,
            in_exponent=in_exponent or node.op == "pow")
        return Binary(node.op, left, right)
    return node


def parse(source: str, lib: SymbolLibrary, literals: str | None = None) -> Expression:
    """Parse a source string into a validated :class:`Expression`.

    Raises :class:`ExpressionSyntaxError` on malformed input and
    :class:`LibraryViolationError` when the parsed tree breaks a library
    rule (unknown symbol, pow limits, nesting depth, constants in a
    constant-free library).
    """
    if not source or not source.strip():
        raise ExpressionSyntaxError("empty expression")
    if literals is None:
        literals = "placeholder" if lib.allows_const else "strip"
    if literals not in ("placeholder", "strip", "keep"):
        raise ValueError(f"unknown literal policy {literals!r}")
    node = _Parser(tokenize(source), lib).parse()
    node = _apply_literal_policy(node, literals, [0])
    violations = validate(node, lib)
    if violations:
        raise LibraryViolationError(violations)
    return Expression(node)
