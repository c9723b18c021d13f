"""The outer discovery loop: prompt, extract, evaluate, archive, repeat.

Iteration 0 seeds the population from the init prompt; later iterations
alternate the self-improvement and evolution strategies (or run one of them
exclusively).  A size-K priority queue keeps the best-scoring candidates
found so far, a run-scoped ledger guarantees no canonical key is evaluated
twice, and a native genetic fallback tops the population up whenever the
backend under-delivers or is unreachable.

Every run is captured in a RunRecord whose serialized form contains no
wall-clock data, so a run driven by a replay transcript reproduces
byte-identically.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import TransportError
from .evaluation import Candidate, EvalConfig, evaluate_candidate
from .expressions import Expression, SymbolLibrary
from .extraction import extract_equations
from .genetic import native_evolve, random_expression
from .prompts import PromptBuilder
from .backends import prompt_sha256

SCHEDULES = ("alternate", "self-improve-only", "evolve-only")
PROVENANCE = {"init": "init", "self_improve": "self_improve", "evolve": "evolution"}


@dataclass(frozen=True)
class SearchConfig:
    M: int = 10                  # expressions requested per iteration
    P: int = 100                 # optimization iterations after init
    K: int = 5                   # priority queue size
    seed: int = 0
    schedule: str = "alternate"
    target_score: Optional[float] = None
    fallback_enabled: bool = True
    stagnation_limit: int = 25
    max_workers: int = 4

    def __post_init__(self):
        if self.K > self.M:
            raise ValueError("K must not exceed M")
        if self.P < 1:
            raise ValueError("P must be >= 1")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"schedule must be one of {SCHEDULES}")


class PriorityQueue:
    """Elite archive: at most K candidates, unique by canonical key, ordered
    by descending score (ties: shorter canonical string, then lexicographic).
    The best score never decreases under update()."""

    def __init__(self, k: int):
        self.k = k
        self.entries: list[Candidate] = []

    @staticmethod
    def _order(candidate: Candidate):
        return (-candidate.score, len(candidate.key), candidate.key)

    def update(self, batch: Sequence[Candidate]) -> "PriorityQueue":
        by_key = {c.key: c for c in self.entries}
        for candidate in batch:
            if not candidate.is_valid:
                continue
            incumbent = by_key.get(candidate.key)
            if incumbent is None or candidate.score > incumbent.score:
                by_key[candidate.key] = candidate
        self.entries = sorted(by_key.values(), key=self._order)[:self.k]
        return self

    @property
    def best(self) -> Optional[Candidate]:
        return self.entries[0] if self.entries else None

    def keys(self) -> set:
        return {c.key for c in self.entries}

    def as_dicts(self) -> list:
        return [c.as_dict() for c in self.entries]

    def __len__(self) -> int:
        return len(self.entries)


def update_queue(queue: PriorityQueue, batch: Sequence[Candidate]) -> PriorityQueue:
    return queue.update(batch)


def select_examples(queue: PriorityQueue, last_batch: Sequence[Candidate],
                    m: int) -> list[Candidate]:
    """All queue members plus the best distinct-keyed candidates of the last
    iteration, up to ``m`` total, descending score."""
    chosen = list(queue.entries)
    seen = {c.key for c in chosen}
    extras = [c for c in last_batch if c.is_valid and c.key not in seen]
    extras.sort(key=PriorityQueue._order)
    for candidate in extras:
        if len(chosen) >= m:
            break
        if candidate.key in seen:
            continue
        chosen.append(candidate)
        seen.add(candidate.key)
    return chosen


@dataclass
class IterationRecord:
    index: int
    strategy: str
    prompt_sha256: Optional[str]
    proposals: list            # canonical keys as extracted, pre-dedup
    candidates: list           # scored candidate dicts, evaluation order
    queue: list                # [key, score] pairs after the update
    best_score: Optional[float]
    transport_error: Optional[str] = None

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RunRecord:
    head: dict
    iterations: list = field(default_factory=list)
    final_queue: list = field(default_factory=list)
    stop_reason: str = "max-iterations"

    @property
    def best(self) -> Optional[dict]:
        return self.final_queue[0] if self.final_queue else None

    def to_jsonl(self) -> str:
        lines = [json.dumps({"head": self.head}, sort_keys=True)]
        lines.extend(json.dumps({"iteration": it.as_dict()}, sort_keys=True)
                     for it in self.iterations)
        lines.append(json.dumps(
            {"final_queue": self.final_queue, "stop_reason": self.stop_reason},
            sort_keys=True))
        return "\n".join(lines) + "\n"

    def write(self, path) -> None:
        with open(path, "w") as handle:
            handle.write(self.to_jsonl())

    @classmethod
    def from_jsonl(cls, path) -> "RunRecord":
        head, iterations, tail = {}, [], {}
        with open(path) as handle:
            for line in handle:
                if not line.strip():
                    continue
                obj = json.loads(line)
                if "head" in obj:
                    head = obj["head"]
                elif "iteration" in obj:
                    iterations.append(IterationRecord(**obj["iteration"]))
                else:
                    tail = obj
        return cls(head=head, iterations=iterations,
                   final_queue=tail.get("final_queue", []),
                   stop_reason=tail.get("stop_reason", "unknown"))

    def best_score_trace(self) -> list:
        return [it.best_score for it in self.iterations]


def _strategy_for(iteration: int, schedule: str) -> str:
    if iteration == 0:
        return "init"
    if schedule == "self-improve-only":
        return "self_improve"
    if schedule == "evolve-only":
        return "evolve"
    return "self_improve" if iteration % 2 == 1 else "evolve"


def run_search(data, lib: SymbolLibrary, cfg: SearchConfig, backend,
               eval_cfg: EvalConfig, prompts: Optional[PromptBuilder] = None,
               record_path=None) -> RunRecord:
    """Run the full discovery loop and return its RunRecord.

    ``backend`` may be None for a purely native (offline) run.  On
    TransportError with fallback disabled, the failing iteration is logged
    (and written, when ``record_path`` is given) before the error
    propagates.
    """
    if prompts is None:
        prompts = PromptBuilder(lib, task=getattr(data, "description", None) or None,
                                n_term_max=eval_cfg.n_term_max)
    rng = np.random.default_rng(cfg.seed)
    queue = PriorityQueue(cfg.K)
    seen: set = set()
    last_batch: list[Candidate] = []
    record = RunRecord(head={
        "config": dataclasses.asdict(cfg),
        "eval": dataclasses.asdict(eval_cfg),
        "mode": eval_cfg.mode,
        "library": {"operators": sorted(lib.operators), "operands": list(lib.operands),
                    "allows_const": lib.allows_const},
        "dataset_fingerprint": data.fingerprint(),
        "backend": getattr(backend, "backend_id", "native-only"),
    })

    stagnation = 0
    previous_head = None
    for iteration in range(cfg.P + 1):
        strategy = _strategy_for(iteration, cfg.schedule)
        examples = select_examples(queue, last_batch, cfg.M)
        prompt: Optional[str] = None
        transport_error: Optional[str] = None
        extracted: list[Expression] = []

        if backend is not None:
            if strategy == "self_improve" and not examples:
                strategy = "init"
            if strategy == "evolve" and len(examples) < 2:
                strategy = "init"
            if strategy == "init":
                prompt = prompts.render_init_prompt(cfg.M)
            elif strategy == "self_improve":
                prompt = prompts.render_self_improve_prompt(
                    [(c.key, c.score) for c in examples], n=cfg.M)
            else:
                prompt = prompts.render_evolve_prompt(
                    [c.key for c in examples], n=cfg.M)
            try:
                exchange = backend.complete(prompt)
                extracted = extract_equations(exchange.response, lib, max_n=cfg.M)
            except TransportError as err:
                transport_error = str(err)

        # dedup against the run ledger and within the batch
        to_evaluate: list[tuple] = []
        batch_keys: set = set()
        provenance = PROVENANCE.get(strategy, "init")
        for expr in extracted:
            key = expr.canonical_key
            if key in seen or key in batch_keys:
                continue
            batch_keys.add(key)
            to_evaluate.append((expr, provenance))

        shortfall = cfg.M - len(to_evaluate)
        if shortfall > 0 and cfg.fallback_enabled:
            parents = [c.skeleton for c in examples if c.skeleton is not None]
            fill: list[Expression] = []
            if len(parents) >= 2:
                fill = native_evolve(parents, shortfall, lib,
                                     rng=rng)
            attempts = 0
            while len(fill) < shortfall and attempts < 30 * shortfall:
                fill.append(random_expression(lib, rng))
                attempts += 1
            for expr in fill:
                if len(to_evaluate) >= cfg.M:
                    break
                key = expr.canonical_key
                if key in seen or key in batch_keys:
                    continue
                batch_keys.add(key)
                to_evaluate.append((expr, "native_ga"))

        batch = _evaluate_batch(to_evaluate, data, eval_cfg, cfg)
        seen.update(c.key for c in batch)
        queue.update(batch)
        last_batch = batch

        head = queue.best
        head_id = None if head is None else (head.key, head.score)
        if head_id is not None and head_id == previous_head:
            stagnation += 1
        else:
            stagnation = 0
        previous_head = head_id

        record.iterations.append(IterationRecord(
            index=iteration,
            strategy=strategy,
            prompt_sha256=None if prompt is None else prompt_sha256(prompt),
            proposals=[e.canonical_key for e in extracted],
            candidates=[c.as_dict() for c in batch],
            queue=[[c.key, c.score] for c in queue.entries],
            best_score=None if head is None else head.score,
            transport_error=transport_error,
        ))

        if transport_error is not None and not cfg.fallback_enabled:
            record.stop_reason = "transport-error"
            record.final_queue = queue.as_dicts()
            if record_path is not None:
                record.write(record_path)
            raise TransportError(transport_error)

        if (cfg.target_score is not None and head is not None
                and head.score >= cfg.target_score):
            record.stop_reason = "target-score"
            break
        if stagnation > cfg.stagnation_limit:
            record.stop_reason = "stagnation"
            break

    record.final_queue = queue.as_dicts()
    if record_path is not None:
        record.write(record_path)
    return record


def _evaluate_batch(items: Sequence[tuple], data, eval_cfg: EvalConfig,
                    cfg: SearchConfig) -> list:
    """Evaluate (expression, provenance) pairs, joining in input order."""
    if not items:
        return []
    if cfg.max_workers <= 1 or len(items) == 1:
        return [evaluate_candidate(expr, data, eval_cfg, cfg.seed, prov)
                for expr, prov in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=cfg.max_workers) as pool:
        return list(pool.map(
            lambda item: evaluate_candidate(item[0], data, eval_cfg, cfg.seed, item[1]),
            items))
