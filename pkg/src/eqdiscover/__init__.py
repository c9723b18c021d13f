"""eqdiscover: LLM-guided discovery of governing equations from data.

Candidate equations in string form are generated and refined by a chat
backend through alternating self-improvement and evolutionary prompting
(with a native genetic fallback), while the numerical core parses, fits,
scores and archives candidates against observational data.
"""

from .backends import (
    BackendConfig,
    ChatExchange,
    DeadBackend,
    LiveBackend,
    MockBackend,
    RecordingBackend,
    ReplayBackend,
    complete_batch,
)
from .datasets import (
    OdeTrajectory,
    PdeGrid,
    generate_odebench,
    generate_pde,
    load_grid,
    load_trajectory,
    save_grid,
    save_trajectory,
)
from .errors import EqDiscoverError
from .estimators import OdeDiscovery, PdeDiscovery
from .evaluation import (
    Candidate,
    EvalConfig,
    coefficient_error,
    compare_to_truth,
    evaluate_ode,
    evaluate_pde,
    r_squared,
    score,
    trajectory_r_squared,
)
from .expressions import Expression, SymbolLibrary, print_canonical, split_terms, validate
from .extraction import extract_equations
from .genetic import native_evolve, random_expression
from .numerics import fd_derivative, fit_constants, integrate_ode, ridge, stridge
from .parsing import parse
from .prompts import PromptBuilder
from .search import PriorityQueue, RunRecord, SearchConfig, run_search, select_examples, update_queue

__version__ = "0.1.0"

__all__ = [
    "BackendConfig", "ChatExchange", "DeadBackend", "LiveBackend", "MockBackend",
    "RecordingBackend", "ReplayBackend", "complete_batch",
    "OdeTrajectory", "PdeGrid", "generate_odebench", "generate_pde",
    "load_grid", "load_trajectory", "save_grid", "save_trajectory",
    "EqDiscoverError",
    "OdeDiscovery", "PdeDiscovery",
    "Candidate", "EvalConfig", "coefficient_error", "compare_to_truth",
    "evaluate_ode", "evaluate_pde", "r_squared", "score", "trajectory_r_squared",
    "Expression", "SymbolLibrary", "print_canonical", "split_terms", "validate",
    "extract_equations",
    "native_evolve", "random_expression",
    "fd_derivative", "fit_constants", "integrate_ode", "ridge", "stridge",
    "parse",
    "PromptBuilder",
    "PriorityQueue", "RunRecord", "SearchConfig", "run_search",
    "select_examples", "update_queue",
]
