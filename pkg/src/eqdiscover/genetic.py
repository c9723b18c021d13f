"""Native genetic operators over expression trees.

These mirror the evolution instructions given to the language model and
serve two roles: an offline fallback that keeps the population topped up
when the backend fails or under-delivers, and a test oracle for the
evolution semantics.  All randomness flows through one numpy Generator, so
results are a pure function of (parents, n, seed).
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .errors import TooFewParentsError
from .expressions import (
    Binary,
    Const,
    Expression,
    Literal,
    SignedTerm,
    SymbolLibrary,
    Unary,
    UNARY_FUNCS,
    Var,
    is_valid,
    recompose,
    split_terms,
)

SUBTREE_SWAP_PROB = 0.3
MUTATE_PROB = 0.3
MAX_ATTEMPTS = 20


# --------------------------------------------------------------------------
# tree surgery helpers

def node_paths(node, prefix=()) -> list:
    """All (path, node) pairs, root first; path elements are L/R/C."""
    out = [(prefix, node)]
    if isinstance(node, Unary):
        out.extend(node_paths(node.child, prefix + ("C",)))
    elif isinstance(node, Binary):
        out.extend(node_paths(node.left, prefix + ("L",)))
        out.extend(node_paths(node.right, prefix + ("R",)))
    return out


def replace_at(node, path, replacement):
    if not path:
        return replacement
    step, rest = path[0], path[1:]
    if isinstance(node, Unary):
        return Unary(node.op, replace_at(node.child, rest, replacement))
    if step == "L":
        return Binary(node.op, replace_at(node.left, rest, replacement), node.right)
    return Binary(node.op, node.left, replace_at(node.right, rest, replacement))


def swap_term(parent1: Expression, parent2: Expression, i: int, j: int) -> Expression:
    """Replace signed term ``i`` of parent1 with signed term ``j`` of parent2."""
    terms1 = split_terms(parent1.root)
    terms2 = split_terms(parent2.root)
    terms1[i] = terms2[j]
    return Expression(recompose(terms1))


# --------------------------------------------------------------------------
# random generation

def _random_leaf(lib: SymbolLibrary, rng) -> object:
    if lib.allows_const and rng.random() < 0.25:
        return Const(0)
    return Var(lib.operands[int(rng.integers(len(lib.operands)))])


def _random_term(lib: SymbolLibrary, rng, depth: int, func_budget: int):
    if depth <= 0:
        return _random_leaf(lib, rng)
    options = ["leaf", "mul"]
    if "div" in lib.operators:
        options.append("div")
    if "pow" in lib.operators:
        options.append("pow")
    if func_budget > 0 and any(f in lib.operators for f in UNARY_FUNCS):
        options.append("func")
    choice = options[int(rng.integers(len(options)))]
    if choice == "leaf":
        return _random_leaf(lib, rng)
    if choice == "pow":
        exponent = int(rng.integers(2, (lib.max_pow or 5) + 1))
        return Binary("pow", _random_leaf(lib, rng), Literal(float(exponent)))
    if choice == "func":
        funcs = [f for f in UNARY_FUNCS if f in lib.operators]
        f = funcs[int(rng.integers(len(funcs)))]
        return Unary(f, _random_term(lib, rng, depth - 1, func_budget - 1))
    left = _random_term(lib, rng, depth - 1, func_budget)
    right = _random_term(lib, rng, depth - 1, func_budget)
    return Binary("mul" if choice == "mul" else "div", left, right)


def random_expression(lib: SymbolLibrary, rng, max_terms: int = 3,
                      max_depth: int = 3) -> Expression:
    """A uniformly structured random expression obeying the library rules."""
    for _ in range(MAX_ATTEMPTS):
        n_terms = 1 + int(rng.integers(max_terms))
        terms = []
        for _ in range(n_terms):
            node = _random_term(lib, rng, int(rng.integers(1, max_depth + 1)),
                                lib.max_nesting_depth)
            if lib.allows_const and rng.random() < 0.5:
                node = Binary("mul", Const(0), node)
            sign = 1 if rng.random() < 0.7 else -1
            terms.append(SignedTerm(sign, node))
        expr = Expression(recompose(terms)).canonicalize()
        if is_valid(expr, lib):
            return expr
    return Expression(Var(lib.operands[0]))


# --------------------------------------------------------------------------
# crossover and mutation

def _crossover(p1: Expression, p2: Expression, rng) -> Expression:
    terms1 = split_terms(p1.root)
    terms2 = split_terms(p2.root)
    if rng.random() < SUBTREE_SWAP_PROB:
        # graft a random subtree of a donor term into a random spot of ours
        host_i = int(rng.integers(len(terms1)))
        sign, host = terms1[host_i]
        spots = node_paths(host)
        path, _ = spots[int(rng.integers(len(spots)))]
        donor_term = terms2[int(rng.integers(len(terms2)))].node
        donors = [(p, d) for p, d in node_paths(donor_term)
                  if not isinstance(d, Literal)] or node_paths(donor_term)
        _, graft = donors[int(rng.integers(len(donors)))]
        terms1[host_i] = SignedTerm(sign, replace_at(host, path, graft))
        return Expression(recompose(terms1))
    i = int(rng.integers(len(terms1)))
    j = int(rng.integers(len(terms2)))
    return swap_term(p1, p2, i, j)


def _mutate(expr: Expression, lib: SymbolLibrary, rng) -> Expression:
    arith = [op for op in ("add", "sub", "mul", "div") if op in lib.operators]
    funcs = [f for f in UNARY_FUNCS if f in lib.operators]
    sites = []
    for path, node in node_paths(expr.root):
        if isinstance(node, Binary) and node.op in arith and len(arith) > 1:
            sites.append((path, node, "binary"))
        elif isinstance(node, Unary) and node.op in funcs and len(funcs) > 1:
            sites.append((path, node, "func"))
        elif isinstance(node, Var) and len(lib.operands) > 1:
            sites.append((path, node, "operand"))
    if not sites:
        return expr
    path, node, kind = sites[int(rng.integers(len(sites)))]
    if kind == "binary":
        pool = [op for op in arith if op != node.op]
        new: object = Binary(pool[int(rng.integers(len(pool)))], node.left, node.right)
    elif kind == "func":
        pool = [f for f in funcs if f != node.op]
        new = Unary(pool[int(rng.integers(len(pool)))], node.child)
    else:
        pool = [v for v in lib.operands if v != node.name]
        new = Var(pool[int(rng.integers(len(pool)))])
    return Expression(replace_at(expr.root, path, new))


def native_evolve(parents: Sequence[Expression], n: int, lib: SymbolLibrary,
                  seed: int = 0,
                  rng: Optional[np.random.Generator] = None) -> list:
    """Produce ``n`` offspring by crossover (whole-term swap, or subtree
    graft with probability 0.3) plus mutation with probability 0.3.

    Each offspring gets up to 20 attempts to come out valid under the
    library; persistent failures are skipped, so the result can be shorter
    than ``n``.  Deterministic for a fixed seed.
    """
    if len(parents) < 2:
        raise TooFewParentsError(
            f"evolution requires at least 2 parents, got {len(parents)}")
    if rng is None:
        rng = np.random.default_rng(seed)
    offspring = []
    for _ in range(n):
        for _attempt in range(MAX_ATTEMPTS):
            picks = rng.choice(len(parents), size=2, replace=False)
            child = _crossover(parents[int(picks[0])], parents[int(picks[1])], rng)
            if rng.random() < MUTATE_PROB:
                child = _mutate(child, lib, rng)
            child = child.canonicalize()
            if is_valid(child, lib):
                offspring.append(child)
                break
    return offspring
