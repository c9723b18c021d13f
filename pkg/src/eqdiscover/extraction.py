"""Robust extraction of candidate equations from free-form model output.

Scan order: fenced code blocks first, then numbered or bulleted lines, then
every nonempty line.  A line that fails to parse as a whole is salvaged by
searching for its longest parseable token span, so an equation buried in
prose is still found.  Lines that parse but violate the library are dropped
with a logged reason; extraction itself never raises.
"""

from __future__ import annotations

import logging
import re
from typing import Optional

from .errors import ExpressionSyntaxError, LibraryViolationError
from .expressions import Expression, SymbolLibrary, validate
from .parsing import _apply_literal_policy, _Parser, parse, tokenize

logger = logging.getLogger(__name__)

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_LIST_RE = re.compile(r"^\s*(?:\d+\s*[.)]\s+|[-*•]\s+)(.*)$")
_UNICODE_OPS = str.maketrans({"−": "-", "×": "*", "·": "*", "÷": "/"})


def _candidate_lines(response: str) -> list[str]:
    blocks = _FENCE_RE.findall(response)
    if blocks:
        return [line for block in blocks for line in block.splitlines() if line.strip()]
    listed = []
    for line in response.splitlines():
        m = _LIST_RE.match(line)
        if m and m.group(1).strip():
            listed.append(m.group(1))
    if listed:
        return listed
    return [line for line in response.splitlines() if line.strip()]


def _clean(line: str) -> str:
    line = line.translate(_UNICODE_OPS).strip().strip("`").strip()
    line = line.rstrip(".,;:")
    if "=" in line:
        line = line.rsplit("=", 1)[1]
    return line.strip()


def _parse_unchecked(source: str, lib: SymbolLibrary) -> Expression:
    policy = "placeholder" if lib.allows_const else "strip"
    node = _Parser(tokenize(source), lib).parse()
    return Expression(_apply_literal_policy(node, policy, [0]))


def _salvage(line: str, lib: SymbolLibrary) -> Optional[Expression]:
    """Longest token span of the line that parses as an expression.

    Spans mentioning identifiers outside the library are treated as prose
    and skipped; a span that parses from library symbols is committed even
    if it breaks a structural rule, so the caller can log the violation.
    """
    try:
        tokens = tokenize(re.sub(r"[^0-9A-Za-z_+\-*/^(). ]+", " ", line))
    except ExpressionSyntaxError:
        return None
    texts = [text for _, text in tokens]
    for length in range(len(texts), 0, -1):
        for start in range(len(texts) - length + 1):
            piece = " ".join(texts[start:start + length])
            try:
                expr = _parse_unchecked(piece, lib)
            except ExpressionSyntaxError:
                continue
            if any(v.kind == "unknown-symbol" for v in validate(expr, lib)):
                continue
            return expr
    return None


def extract_equations(response: str, lib: SymbolLibrary,
                      max_n: Optional[int] = None) -> list[Expression]:
    """Parse and validate candidate expressions from a model response, in
    order of appearance; at most ``max_n`` are returned."""
    found: list[Expression] = []
    for raw in _candidate_lines(response):
        if max_n is not None and len(found) >= max_n:
            break
        line = _clean(raw)
        if not line:
            continue
        try:
            found.append(parse(line, lib))
            continue
        except LibraryViolationError as err:
            logger.info("dropped %r: %s", line, err)
            continue
        except ExpressionSyntaxError:
            pass
        expr = _salvage(line, lib)
        if expr is None:
            logger.debug("no expression found in %r", raw)
            continue
        violations = validate(expr, lib)
        if violations:
            logger.info("dropped %r: %s", str(expr),
                        "; ".join(str(v) for v in violations))
            continue
        found.append(expr)
    return found
