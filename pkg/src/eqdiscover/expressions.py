"""Expression trees over a symbol library.

The tree node kinds are ``Var`` (named operand), ``Const`` (indexed free
constant, the entries of the fitted vector), ``Literal`` (a fixed number),
``Unary`` and ``Binary`` (operator applications).  Trees are immutable and
safe to share between threads; every operation in this module is pure.

Canonicalization sorts the operands of commutative operators, extracts signs
out of products, drops unit literal factors and renumbers constants, but
performs no other algebra (no distribution, no like-term merging).  The
canonical string of an expression is the deduplication key used throughout
the search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, NamedTuple, Optional, Union

import numpy as np

BINARY_OPS = ("add", "sub", "mul", "div", "pow")
UNARY_FUNCS = ("sin", "cos", "log", "exp")
_NUMPY_UNARY = {"sin": np.sin, "cos": np.cos, "log": np.log, "exp": np.exp}


@dataclass(frozen=True)
class Var:
    """A named operand, e.g. ``u_xx`` or ``x``."""

    name: str


@dataclass(frozen=True)
class Const:
    """A free constant placeholder ``c<index>``.

    ``init`` carries a start value when the placeholder was converted from a
    numeric literal; it never affects equality of canonical strings.
    """

    index: int
    init: Optional[float] = field(default=None, compare=False)


@dataclass(frozen=True)
class Literal:
    """A fixed numeric value."""

    value: float


@dataclass(frozen=True)
class Unary:
    """``neg`` or one of the unary functions applied to a child."""

    op: str
    child: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


Node = Union[Var, Const, Literal, Unary, Binary]


class SignedTerm(NamedTuple):
    """One top-level summand with its sign (+1 or -1)."""

    sign: int
    node: Node


@dataclass(frozen=True)
class Violation:
    """One rule broken by an expression against a library (data, not raised)."""

    kind: str  # unknown-symbol | unknown-operator | const-not-allowed | pow | nesting
    message: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.message}"


@dataclass(frozen=True)
class SymbolLibrary:
    """Permitted operators and operands, plus structural limits.

    ``max_pow`` of None leaves exponents unrestricted (ODE mode); an integer
    restricts ``^`` to integer literal exponents in ``1..max_pow`` (PDE mode).
    ``max_nesting_depth`` bounds how deeply unary functions may be nested.
    """

    operators: frozenset[str]
    operands: tuple[str, ...]
    allows_const: bool
    max_pow: Optional[int] = None
    max_nesting_depth: int = 2

    def __post_init__(self):
        if len(set(self.operands)) != len(self.operands):
            raise ValueError("operand names must be unique")
        if any(not name for name in self.operands):
            raise ValueError("operand names must be nonempty")
        unknown = self.operators - set(BINARY_OPS) - set(UNARY_FUNCS)
        if unknown:
            raise ValueError(f"unknown operator tags: {sorted(unknown)}")
        if self.max_pow is not None and self.max_pow < 1:
            raise ValueError("max_pow must be >= 1")
        if self.max_nesting_depth < 1:
            raise ValueError("max_nesting_depth must be >= 1")

    @staticmethod
    def pde_default(operands: tuple[str, ...] = ("u", "x", "u_x", "u_xx", "u_xxx", "u_xxxx")) -> "SymbolLibrary":
        """Library for PDE identification: {+,-,*,/,^2,^3} over field operands, no constants."""
        return SymbolLibrary(
            operators=frozenset({"add", "sub", "mul", "div", "pow"}),
            operands=operands,
            allows_const=False,
            max_pow=3,
        )

    @staticmethod
    def ode_default(operands: tuple[str, ...] = ("x",)) -> "SymbolLibrary":
        """Library for ODE discovery: all nine operators over {x, const}."""
        return SymbolLibrary(
            operators=frozenset({"add", "sub", "mul", "div", "pow", "sin", "cos", "log", "exp"}),
            operands=operands,
            allows_const=True,
            max_pow=None,
        )

    def operator_symbols(self) -> list[str]:
        """Human-readable operator list, e.g. ['+', '-', '*', '/', '^2', '^3']."""
        symbols = []
        for tag, sym in (("add", "+"), ("sub", "-"), ("mul", "*"), ("div", "/")):
            if tag in self.operators:
                symbols.append(sym)
        if "pow" in self.operators:
            if self.max_pow is None:
                symbols.append("^")
            else:
                symbols.extend(f"^{k}" for k in range(2, self.max_pow + 1))
        symbols.extend(f for f in UNARY_FUNCS if f in self.operators)
        return symbols


# --------------------------------------------------------------------------
# traversal helpers

def walk(node: Node) -> Iterator[Node]:
    """Yield every node, parents before children, left before right."""
    yield node
    if isinstance(node, Unary):
        yield from walk(node.child)
    elif isinstance(node, Binary):
        yield from walk(node.left)
        yield from walk(node.right)


def count_constants(node: Node) -> int:
    return sum(1 for n in walk(node) if isinstance(n, Const))


def const_inits(node: Node) -> list[Optional[float]]:
    """Start values of the constants in index order (None where unknown)."""
    inits: dict[int, Optional[float]] = {}
    for n in walk(node):
        if isinstance(n, Const):
            inits[n.index] = n.init
    return [inits[i] for i in sorted(inits)]


# --------------------------------------------------------------------------
# numeric evaluation

def evaluate(node: Node, env: dict, constants=None):
    """Evaluate a tree over arrays.

    ``env`` maps operand names to arrays (or scalars); ``constants`` is the
    vector for ``Const`` placeholders.  Division by zero, log of negatives
    and overflow propagate as inf/nan rather than raising; callers decide
    what non-finite values mean.
    """
    with np.errstate(all="ignore"):
        return _eval(node, env, constants)


def _eval(node, env, constants):
    if isinstance(node, Var):
        try:
            return env[node.name]
        except KeyError:
            raise KeyError(f"operand {node.name!r} missing from evaluation data") from None
    if isinstance(node, Literal):
        return node.value
    if isinstance(node, Const):
        if constants is None:
            raise ValueError("expression has constant placeholders but no constants were given")
        return constants[node.index]
    if isinstance(node, Unary):
        child = _eval(node.child, env, constants)
        if node.op == "neg":
            return -child
        return _NUMPY_UNARY[node.op](child)
    left = _eval(node.left, env, constants)
    right = _eval(node.right, env, constants)
    if node.op == "add":
        return left + right
    if node.op == "sub":
        return left - right
    if node.op == "mul":
        return left * right
    if node.op == "div":
        return np.divide(left, right)
    if node.op == "pow":
        if isinstance(node.right, Literal) and float(node.right.value).is_integer():
            return np.power(left, int(node.right.value))
        return np.power(left, right)
    raise ValueError(f"unknown operator {node.op!r}")


# --------------------------------------------------------------------------
# term splitting

def split_terms(node: Node) -> list[SignedTerm]:
    """Unfold top-level +/- (and sign flips) into signed terms, source order."""
    out: list[SignedTerm] = []
    _split(node, +1, out)
    return out


def _split(node, sign, out):
    if isinstance(node, Binary) and node.op in ("add", "sub"):
        _split(node.left, sign, out)
        _split(node.right, sign if node.op == "add" else -sign, out)
    elif isinstance(node, Unary) and node.op == "neg":
        _split(node.child, -sign, out)
    else:
        out.append(SignedTerm(sign, node))


def recompose(terms: list[SignedTerm]) -> Node:
    """Rebuild a sum node from signed terms (inverse of split up to signs)."""
    if not terms:
        raise ValueError("cannot recompose an empty term list")
    sign, node = terms[0]
    acc: Node = Unary("neg", node) if sign < 0 else node
    for sign, node in terms[1:]:
        acc = Binary("add" if sign > 0 else "sub", acc, node)
    return acc


# --------------------------------------------------------------------------
# rendering

_LVL_ADD, _LVL_NEG, _LVL_MUL, _LVL_POW, _LVL_ATOM = 1.0, 1.5, 2.0, 3.0, 4.0


def _fmt_number(v: float) -> str:
    if float(v).is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(float(v))


def render(node: Node, anon_consts: bool = False) -> str:
    """Deterministic infix string for a tree (no reordering performed here)."""
    return _render(node, anon_consts)[0]


def _render(node, anon):
    if isinstance(node, Var):
        return node.name, _LVL_ATOM
    if isinstance(node, Const):
        return ("c" if anon else f"c{node.index}"), _LVL_ATOM
    if isinstance(node, Literal):
        s = _fmt_number(node.value)
        return s, (_LVL_NEG if node.value < 0 else _LVL_ATOM)
    if isinstance(node, Unary):
        if node.op == "neg":
            s, lvl = _render(node.child, anon)
            if lvl < _LVL_NEG:
                s = f"({s})"
            return "-" + s, _LVL_NEG
        s, _ = _render(node.child, anon)
        return f"{node.op}({s})", _LVL_ATOM
    ls, ll = _render(node.left, anon)
    rs, rl = _render(node.right, anon)
    if node.op in ("add", "sub"):
        if ll < _LVL_ADD:
            ls = f"({ls})"
        if rl <= _LVL_ADD:
            rs = f"({rs})"
        return f"{ls} {'+' if node.op == 'add' else '-'} {rs}", _LVL_ADD
    if node.op in ("mul", "div"):
        if ll < _LVL_MUL:
            ls = f"({ls})"
        if rl <= _LVL_MUL:
            rs = f"({rs})"
        return f"{ls}{'*' if node.op == 'mul' else '/'}{rs}", _LVL_MUL
    # pow: right-associative, binds tighter than unary minus
    if ll <= _LVL_POW:
        ls = f"({ls})"
    if rl < _LVL_POW:
        rs = f"({rs})"
    return f"{ls}^{rs}", _LVL_POW


# --------------------------------------------------------------------------
# canonicalization

def _norm_product(node) -> tuple[int, list[Node], list[Node]]:
    """Flatten a term through mul/div/neg into (sign, numerators, denominators)."""
    if isinstance(node, Unary) and node.op == "neg":
        sign, nums, dens = _norm_product(node.child)
        return -sign, nums, dens
    if isinstance(node, Binary) and node.op == "mul":
        s1, n1, d1 = _norm_product(node.left)
        s2, n2, d2 = _norm_product(node.right)
        return s1 * s2, n1 + n2, d1 + d2
    if isinstance(node, Binary) and node.op == "div":
        s1, n1, d1 = _norm_product(node.left)
        s2, n2, d2 = _norm_product(node.right)
        return s1 * s2, n1 + d2, d1 + n2
    factor = _norm_factor(node)
    if isinstance(factor, Literal) and factor.value < 0:
        return -1, [Literal(-factor.value)], []
    return 1, [factor], []


def _norm_factor(node) -> Node:
    """Normalize a non-product node (sums sorted, children normalized)."""
    if isinstance(node, (Var, Const)):
        return node
    if isinstance(node, Literal):
        return node
    if isinstance(node, Unary):
        if node.op == "neg":
            # sign cannot escape a factor position; fold literal, else keep neg
            child = _norm_factor(node.child)
            if isinstance(child, Literal):
                return Literal(-child.value)
            sign, nums, dens = _norm_product(node)
            return _build_term(sign, nums, dens)
        return Unary(node.op, _norm_sum(node.child))
    if node.op in ("add", "sub"):
        return _norm_sum(node)
    if node.op == "pow":
        return Binary("pow", _norm_factor(node.left), _norm_factor(node.right))
    # mul/div appearing in factor position (e.g. inside sin or pow)
    sign, nums, dens = _norm_product(node)
    return _build_term(sign, nums, dens)


def _build_term(sign: int, nums: list[Node], dens: list[Node]) -> Node:
    nums = sorted((n for n in nums if not (isinstance(n, Literal) and n.value == 1)),
                  key=lambda n: render(n, anon_consts=True))
    dens = sorted((d for d in dens if not (isinstance(d, Literal) and d.value == 1)),
                  key=lambda n: render(n, anon_consts=True))
    num: Node = nums[0] if nums else Literal(1.0)
    for n in nums[1:]:
        num = Binary("mul", num, n)
    term = num
    if dens:
        den: Node = dens[0]
        for d in dens[1:]:
            den = Binary("mul", den, d)
        term = Binary("div", term, den)
    if sign < 0:
        term = Unary("neg", term) if not isinstance(term, Literal) else Literal(-term.value)
    return term


def _norm_sum(node) -> Node:
    terms = []
    for sign, raw in split_terms(node):
        s, nums, dens = _norm_product(raw)
        terms.append(SignedTerm(sign * s, _build_term(1, nums, dens)))
    if len(terms) == 1:
        sign, term = terms[0]
        return Unary("neg", term) if sign < 0 else term
    terms.sort(key=lambda t: render(t.node, anon_consts=True))
    return recompose(terms)


def _reindex_constants(node: Node, counter: list[int]) -> Node:
    if isinstance(node, Const):
        idx = counter[0]
        counter[0] += 1
        return Const(idx, node.init)
    if isinstance(node, Unary):
        return Unary(node.op, _reindex_constants(node.child, counter))
    if isinstance(node, Binary):
        left = _reindex_constants(node.left, counter)
        right = _reindex_constants(node.right, counter)
        return Binary(node.op, left, right)
    return node


def canonicalize_node(node: Node) -> Node:
    """Normalized tree: sorted commutative operands, extracted signs,
    pruned unit factors, constants renumbered in canonical reading order."""
    return _reindex_constants(_norm_sum(node), [0])


# --------------------------------------------------------------------------
# public expression wrapper

@dataclass(frozen=True)
class Expression:
    """An immutable expression tree.

    ``canonical_key`` is the deterministic string form used for printing and
    deduplication; ``canonicalize()`` returns the normalized expression whose
    constant indices follow canonical reading order.
    """

    root: Node

    @cached_property
    def canonical_key(self) -> str:
        return render(canonicalize_node(self.root))

    def canonicalize(self) -> "Expression":
        return Expression(canonicalize_node(self.root))

    @property
    def n_constants(self) -> int:
        return count_constants(self.root)

    def terms(self) -> list[SignedTerm]:
        return split_terms(self.root)

    def evaluate(self, env: dict, constants=None):
        return evaluate(self.root, env, constants)

    def __str__(self) -> str:
        return self.canonical_key

    def __repr__(self) -> str:
        return f"Expression({render(self.root)!r})"


def print_canonical(expr: Expression) -> str:
    """Canonical string of an expression (see module docstring for the rules)."""
    return expr.canonical_key


# --------------------------------------------------------------------------
# validation

def validate(expr: Union[Expression, Node], lib: SymbolLibrary) -> list[Violation]:
    """Collect every library rule the expression breaks (empty list if none)."""
    node = expr.root if isinstance(expr, Expression) else expr
    violations: list[Violation] = []
    _validate(node, lib, 0, violations)
    return violations


def _validate(node, lib, func_depth, out):
    if isinstance(node, Var):
        if node.name not in lib.operands:
            out.append(Violation("unknown-symbol", f"operand {node.name!r} is not in the library"))
    elif isinstance(node, Const):
        if not lib.allows_const:
            out.append(Violation("const-not-allowed", "constants are not permitted in this library"))
    elif isinstance(node, Literal):
        pass
    elif isinstance(node, Unary):
        if node.op == "neg":
            _validate(node.child, lib, func_depth, out)
            return
        if node.op not in lib.operators:
            out.append(Violation("unknown-operator", f"operator {node.op!r} is not in the library"))
        depth = func_depth + 1
        if depth > lib.max_nesting_depth:
            out.append(Violation(
                "nesting",
                f"unary functions nested {depth} deep (limit {lib.max_nesting_depth})"))
        _validate(node.child, lib, depth, out)
    else:
        if node.op not in lib.operators:
            out.append(Violation("unknown-operator", f"operator {node.op!r} is not in the library"))
        if node.op == "pow" and lib.max_pow is not None:
            exp = node.right
            ok = (isinstance(exp, Literal) and float(exp.value).is_integer()
                  and 1 <= exp.value <= lib.max_pow)
            if not ok:
                shown = render(exp) if not isinstance(exp, Literal) else _fmt_number(exp.value)
                out.append(Violation(
                    "pow", f"exponent {shown} outside integer range 1..{lib.max_pow}"))
            _validate(node.left, lib, func_depth, out)
            return
        _validate(node.left, lib, func_depth, out)
        _validate(node.right, lib, func_depth, out)


def is_valid(expr: Union[Expression, Node], lib: SymbolLibrary) -> bool:
    return not validate(expr, lib)
