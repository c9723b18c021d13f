"""Prompt construction for the three search stages.

Every prompt carries four components: a task description, the symbol
library, stage instructions, and constraints/format hints; the optimization
stages additionally embed historical examples (equation-score pairs for
self-improvement, bare equation strings for evolution).

The stage templates are plain text files with ``$slot`` placeholders so
users can substitute their own wording without touching code; point
``PromptBuilder`` at a directory containing ``init.txt``,
``self_improve.txt`` and ``evolve.txt`` to override the packaged ones.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

from .errors import TooFewParentsError
from .expressions import SymbolLibrary

KINDS = ("init", "self_improve", "evolve")

DEFAULT_PDE_TASK = (
    "You are searching for the governing equation of a nonlinear dynamical "
    "system observed on a space-time grid. The left-hand side is the time "
    "derivative u_t; propose right-hand sides built from the state u, the "
    "coordinate x, and spatial derivatives of u.")
DEFAULT_ODE_TASK = (
    "You are searching for the governing equation of a one-dimensional "
    "dynamical system observed along a trajectory. The left-hand side is "
    "the time derivative dx/dt; propose right-hand sides built from the "
    "state x and unknown constants.")


def _count_text(n: int, noun: str = "equation") -> str:
    return f"exactly one {noun}" if n == 1 else f"exactly {n} {noun}s"


def _load_template(kind: str, template_dir: Optional[Path]) -> string.Template:
    if template_dir is not None:
        text = (Path(template_dir) / f"{kind}.txt").read_text()
    else:
        text = resources.files("eqdiscover.templates").joinpath(f"{kind}.txt").read_text()
    return string.Template(text)


@dataclass(frozen=True)
class PromptTemplate:
    """One stage's template together with its rendered static components."""

    kind: str
    task_description: str
    symbol_library_text: str
    constraints_text: str
    output_format_text: str
    template: string.Template

    def render(self, **slots) -> str:
        base = {
            "task": self.task_description,
            "constraints": self.constraints_text,
            "output_format": self.output_format_text,
        }
        base.update(slots)
        return self.template.substitute(base)


class PromptBuilder:
    """Renders the init / self-improvement / evolution prompts for one
    library and task.  Rendering is deterministic: equal inputs produce
    byte-identical prompts."""

    def __init__(self, lib: SymbolLibrary, task: Optional[str] = None,
                 n_term_max: int = 6, template_dir: Optional[Path] = None):
        self.lib = lib
        if task is None:
            task = DEFAULT_ODE_TASK if lib.allows_const else DEFAULT_PDE_TASK
        self.task = task
        self.n_term_max = n_term_max
        self._templates = {kind: _load_template(kind, template_dir) for kind in KINDS}

    # -- static components ------------------------------------------------

    @property
    def operators_text(self) -> str:
        return ", ".join(self.lib.operator_symbols())

    @property
    def operands_text(self) -> str:
        names = list(self.lib.operands)
        if self.lib.allows_const:
            names.append("const")
        return ", ".join(names)

    @property
    def constraints_text(self) -> str:
        rules = [
            f"- use at most {self.n_term_max} terms joined by + or -",
        ]
        if self.lib.allows_const:
            rules.append(
                "- write every unknown constant as the token const (or c0, c1, ...); "
                "constant values are fitted automatically, so never invent numeric values")
        else:
            rules.append(
                "- do not use numeric constants or a const token: the coefficient "
                "of every term is determined automatically by regression")
        if self.lib.max_pow is not None:
            rules.append(
                f"- powers must use integer exponents between 2 and {self.lib.max_pow}")
        if any(f in self.lib.operators for f in ("sin", "cos", "log", "exp")):
            rules.append(
                f"- never nest unary functions (sin, cos, log, exp) more than "
                f"{self.lib.max_nesting_depth} levels deep")
        rules.append("- use only symbols from the library")
        return "\n".join(rules)

    def _template(self, kind: str, n: int) -> PromptTemplate:
        return PromptTemplate(
            kind=kind,
            task_description=self.task,
            symbol_library_text=f"operators: {self.operators_text}; operands: {self.operands_text}",
            constraints_text=self.constraints_text,
            output_format_text=f"one fenced code block containing {_count_text(n)}",
            template=self._templates[kind],
        )

    # -- stage renderers ---------------------------------------------------

    def render_init_prompt(self, n: int) -> str:
        if n < 1:
            raise ValueError("n must be >= 1")
        return self._template("init", n).render(
            operators=self.operators_text,
            operands=self.operands_text,
            n_text=_count_text(n))

    def render_self_improve_prompt(self, examples: Sequence[tuple], n: int = 10) -> str:
        """``examples`` are (equation string, score) pairs sorted by
        descending score; scores render at 4 decimal places."""
        if not examples:
            raise ValueError("self-improvement requires at least one example")
        scores = [s for _, s in examples]
        if any(a < b for a, b in zip(scores, scores[1:])):
            raise ValueError("examples must be sorted by descending score")
        lines = "\n".join(f"{i}. {eq}   (score {s:.4f})"
                          for i, (eq, s) in enumerate(examples, start=1))
        return self._template("self_improve", n).render(
            operators=self.operators_text,
            operands=self.operands_text,
            examples=lines,
            n_text=_count_text(n))

    def render_evolve_prompt(self, parents: Sequence[str], n: int = 10) -> str:
        """``parents`` are equation strings (no scores); duplicates are
        rendered as given."""
        if len(parents) < 2:
            raise TooFewParentsError(
                f"evolution requires at least 2 parents, got {len(parents)}")
        lines = "\n".join(f"{i}. {eq}" for i, eq in enumerate(parents, start=1))
        return self._template("evolve", n).render(
            operators=self.operators_text,
            operands=self.operands_text,
            parents=lines,
            n_text=_count_text(n))
