"""Scoring pipeline: turn a proposed skeleton into a scored Candidate.

PDE route: split the skeleton into terms, evaluate each term over the
interior of the grid to build the feature matrix, select a sparse
coefficient vector with STRidge, and score the surviving combination.

ODE route: fit constant placeholders with the quasi-Newton optimizer (or,
for constant-free skeletons, assign per-term coefficients by ridge), then
score the prediction of xdot.

The score is (1 - zeta1*m) / (1 + NRMSE) where m is the surviving term
count and NRMSE is normalized by the population standard deviation of the
regression target over the evaluated points.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import AllCoefficientsEliminatedError, NoFiniteStartError
from .expressions import Expression, render, split_terms
from .numerics import fit_constants, integrate_ode, ridge, stridge

TRIM_TIME = 1   # rows whose u_t stencil touches the time boundary
TRIM_SPACE = 2  # columns whose 3rd/4th-derivative stencils touch the edge


@dataclass(frozen=True)
class EvalConfig:
    mode: str                            # "pde" | "ode"
    zeta1: float = 0.01                  # parsimony penalty per term
    lam: float = 0.001                   # ridge regularization weight
    n_term_max: int = 6
    stridge_rel_threshold: float = 0.015  # fraction of max |xi| (unit-norm columns)
    stridge_max_iter: int = 10
    restarts: int = 10                   # quasi-Newton restarts for constant fits
    max_nonfinite_fraction: float = 0.01

    def __post_init__(self):
        if self.mode not in ("pde", "ode"):
            raise ValueError("mode must be 'pde' or 'ode'")
        if self.zeta1 * self.n_term_max >= 1:
            raise ValueError("zeta1 * n_term_max must stay below 1")


@dataclass
class Candidate:
    """A scored (or invalidated) equation candidate."""

    skeleton: Optional[Expression]   # coefficient-bearing surviving form
    key: str                         # canonical dedup key
    constants: np.ndarray
    terms: tuple                     # canonical term strings aligned with constants (PDE / linear fit)
    term_count: int
    nrmse: float
    score: float
    status: str                      # "scored" | "invalid"
    provenance: str = "init"
    detail: str = ""

    @property
    def is_valid(self) -> bool:
        return self.status == "scored"

    def as_dict(self) -> dict:
        return {
            "key": self.key,
            "equation": None if self.skeleton is None else str(self.skeleton),
            "constants": [float(c) for c in np.atleast_1d(self.constants)],
            "terms": list(self.terms),
            "m": self.term_count,
            "nrmse": float(self.nrmse) if np.isfinite(self.nrmse) else None,
            "score": float(self.score) if np.isfinite(self.score) else None,
            "status": self.status,
            "provenance": self.provenance,
            "detail": self.detail,
        }


def _invalid(key: str, provenance: str, detail: str) -> Candidate:
    return Candidate(skeleton=None, key=key, constants=np.empty(0), terms=(),
                     term_count=0, nrmse=float("inf"), score=float("-inf"),
                     status="invalid", provenance=provenance, detail=detail)


def score(nrmse: float, m: int, zeta1: float) -> float:
    """Parsimony-penalized fitness (1 - zeta1*m) / (1 + nrmse)."""
    if nrmse < 0:
        raise ValueError("nrmse must be >= 0")
    if m < 1:
        raise ValueError("m must be >= 1")
    return (1.0 - zeta1 * m) / (1.0 + nrmse)


def derive_seed(run_seed: int, key: str) -> int:
    """Stable per-candidate seed: equal canonical keys always fit identically."""
    digest = hashlib.sha256(f"{run_seed}:{key}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def _distinct_terms(expr: Expression) -> list:
    """Canonicalized bare terms (signs dropped, duplicates merged, order kept)."""
    seen = {}
    for _, node in split_terms(expr.canonicalize().root):
        text = render(node)
        if text not in seen:
            seen[text] = node
    return list(seen.items())


def _recompose_sorted(pairs):
    """Build the surviving sum, terms in canonical (sorted-string) order."""
    pairs = sorted(pairs, key=lambda p: p[0])
    from .expressions import Binary
    node = pairs[0][1]
    for _, term in pairs[1:]:
        node = Binary("add", node, term)
    return Expression(node), tuple(p[0] for p in pairs)


def evaluate_pde(skeleton: Expression, grid, cfg: EvalConfig,
                 provenance: str = "init") -> Candidate:
    """Score a skeleton against a PDE grid via sparse regression on u_t."""
    canon = skeleton.canonicalize()
    key = canon.canonical_key
    pairs = _distinct_terms(canon)
    if len(pairs) > cfg.n_term_max:
        return _invalid(key, provenance, f"{len(pairs)} terms exceed limit {cfg.n_term_max}")

    env = grid.env()
    target = env[grid.target]
    trim = (slice(TRIM_TIME, -TRIM_TIME), slice(TRIM_SPACE, -TRIM_SPACE))
    y = target[trim].ravel()
    shape = target[trim].shape

    columns = []
    for _, node in pairs:
        values = Expression(node).evaluate(env)
        values = np.broadcast_to(np.asarray(values, dtype=float), target.shape)
        columns.append(values[trim].ravel())
    theta = np.column_stack(columns)

    finite = np.isfinite(theta).all(axis=1) & np.isfinite(y)
    bad_fraction = 1.0 - finite.mean()
    if bad_fraction > cfg.max_nonfinite_fraction:
        return _invalid(key, provenance,
                        f"{bad_fraction:.1%} of points non-finite")
    theta, y = theta[finite], y[finite]

    sigma = float(np.std(y))
    if sigma == 0.0 or y.size <= theta.shape[1]:
        return _invalid(key, provenance, "degenerate regression target")

    norms = np.linalg.norm(theta, axis=0)
    norms[norms == 0.0] = 1.0
    theta_n = theta / norms
    xi0 = ridge(theta_n, y, cfg.lam)
    tau = cfg.stridge_rel_threshold * float(np.abs(xi0).max())
    if tau <= 0.0:
        return _invalid(key, provenance, "all coefficients vanish")
    try:
        xi_n = stridge(theta_n, y, cfg.lam, tau, cfg.stridge_max_iter)
    except AllCoefficientsEliminatedError:
        return _invalid(key, provenance, "sparsification removed every term")
    xi = xi_n / norms

    surviving = np.flatnonzero(xi_n)
    coeffs = {pairs[i][0]: xi[i] for i in surviving}
    residual = theta[:, surviving] @ xi[surviving] - y
    nrmse = float(np.sqrt(np.mean(residual * residual)) / sigma)
    if not np.isfinite(nrmse):
        return _invalid(key, provenance, "non-finite NRMSE")

    expr, term_strings = _recompose_sorted([pairs[i] for i in surviving])
    constants = np.array([coeffs[t] for t in term_strings])
    m = len(term_strings)
    return Candidate(skeleton=expr, key=expr.canonical_key, constants=constants,
                     terms=term_strings, term_count=m, nrmse=nrmse,
                     score=score(nrmse, m, cfg.zeta1), status="scored",
                     provenance=provenance)


def evaluate_ode(skeleton: Expression, trajectory, cfg: EvalConfig,
                 seed: int = 0, provenance: str = "init") -> Candidate:
    """Score a skeleton against an ODE trajectory (fit of xdot)."""
    canon = skeleton.canonicalize()
    key = canon.canonical_key
    x = np.asarray(trajectory.x, dtype=float)
    xdot = np.asarray(trajectory.xdot, dtype=float)
    sigma = float(np.std(xdot))
    if sigma == 0.0:
        return _invalid(key, provenance, "constant regression target")

    n_const = canon.n_constants
    terms: tuple = ()
    if n_const >= 1:
        m = len(split_terms(canon.root))
        if m > cfg.n_term_max:
            return _invalid(key, provenance, f"{m} terms exceed limit {cfg.n_term_max}")
        try:
            fit = fit_constants(canon, trajectory, restarts=cfg.restarts, seed=seed)
        except NoFiniteStartError as exc:
            return _invalid(key, provenance, str(exc))
        constants = fit.constants
        prediction = np.asarray(canon.evaluate({"x": x}, constants), dtype=float)
        out_expr = canon
    else:
        pairs = _distinct_terms(canon)
        m = len(pairs)
        if m > cfg.n_term_max:
            return _invalid(key, provenance, f"{m} terms exceed limit {cfg.n_term_max}")
        columns = []
        for _, node in pairs:
            values = np.broadcast_to(
                np.asarray(Expression(node).evaluate({"x": x}), dtype=float), x.shape)
            columns.append(values)
        theta = np.column_stack(columns)
        if not np.isfinite(theta).all():
            return _invalid(key, provenance, "non-finite term values")
        constants = ridge(theta, xdot, cfg.lam)
        prediction = theta @ constants
        out_expr, terms = _recompose_sorted(pairs)
        constants = np.array([constants[[p[0] for p in pairs].index(t)] for t in terms])

    with np.errstate(all="ignore"):
        residual = xdot - np.broadcast_to(prediction, xdot.shape)
        nrmse = float(np.sqrt(np.mean(residual * residual)) / sigma)
    if not np.isfinite(nrmse):
        return _invalid(key, provenance, "non-finite NRMSE")
    return Candidate(skeleton=out_expr, key=out_expr.canonical_key,
                     constants=np.asarray(constants, dtype=float), terms=terms,
                     term_count=m, nrmse=nrmse,
                     score=score(nrmse, m, cfg.zeta1), status="scored",
                     provenance=provenance)


def evaluate_candidate(skeleton: Expression, data, cfg: EvalConfig,
                       run_seed: int = 0, provenance: str = "init") -> Candidate:
    if cfg.mode == "pde":
        return evaluate_pde(skeleton, data, cfg, provenance=provenance)
    seed = derive_seed(run_seed, skeleton.canonical_key)
    return evaluate_ode(skeleton, data, cfg, seed=seed, provenance=provenance)


def evaluate_batch(skeletons: Sequence[Expression], data, cfg: EvalConfig,
                   run_seed: int = 0, provenance: str = "init",
                   max_workers: int = 4) -> list:
    """Evaluate a batch concurrently; results join in input order and each
    candidate's fit seed depends only on (run seed, canonical key)."""
    if not skeletons:
        return []
    if max_workers <= 1 or len(skeletons) == 1:
        return [evaluate_candidate(s, data, cfg, run_seed, provenance)
                for s in skeletons]
    with ThreadPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(
            lambda s: evaluate_candidate(s, data, cfg, run_seed, provenance),
            skeletons))


# --------------------------------------------------------------------------
# reporting metrics

def coefficient_error(true_xi, found_xi) -> float:
    """Mean relative coefficient error in percent (term identities must match)."""
    true_xi = np.asarray(true_xi, dtype=float)
    found_xi = np.asarray(found_xi, dtype=float)
    if true_xi.shape != found_xi.shape:
        raise ValueError(
            f"length mismatch: {true_xi.size} true vs {found_xi.size} found")
    if np.any(true_xi == 0.0):
        raise ValueError("true coefficients must be nonzero")
    return float(np.mean(np.abs(found_xi - true_xi) / np.abs(true_xi)) * 100.0)


def compare_to_truth(candidate: Candidate, truth: dict) -> Optional[float]:
    """Coefficient error E in percent, or None when the surviving term set
    differs from the ground truth (structure not recovered)."""
    if not candidate.is_valid:
        return None
    truth_map = {key: float(value) for key, value in truth.items()}
    if set(candidate.terms) != set(truth_map):
        return None
    found = dict(zip(candidate.terms, candidate.constants))
    keys = sorted(truth_map)
    return coefficient_error([truth_map[k] for k in keys],
                             [found[k] for k in keys])


def candidate_prediction(candidate: Candidate, env: dict) -> np.ndarray:
    """Predicted regression target of a scored candidate over an environment.

    Linear candidates (PDE route, or constant-free ODE skeletons) combine
    their term columns with the fitted coefficients; constant-bearing
    skeletons evaluate directly.  The skeleton of a linear candidate is the
    sum of its terms in canonical order, so its split recovers the columns.
    """
    if not candidate.is_valid:
        raise ValueError("cannot predict from an invalid candidate")
    from .expressions import evaluate as evaluate_node
    if candidate.terms:
        shape = np.asarray(next(iter(env.values()))).shape
        total = np.zeros(shape)
        for (_, node), coef in zip(split_terms(candidate.skeleton.root),
                                   candidate.constants):
            values = np.asarray(evaluate_node(node, env), dtype=float)
            total = total + coef * np.broadcast_to(values, shape)
        return total
    return np.asarray(
        candidate.skeleton.evaluate(env, candidate.constants), dtype=float)


def r_squared(truth, prediction) -> float:
    """Coefficient of determination 1 - SS_res / SS_tot."""
    truth = np.asarray(truth, dtype=float)
    prediction = np.asarray(prediction, dtype=float)
    if truth.size == 0 or truth.shape != prediction.shape:
        raise ValueError("truth and prediction must be equal nonzero lengths")
    ss_tot = float(np.sum((truth - truth.mean()) ** 2))
    if ss_tot == 0.0:
        raise ValueError("truth is constant; R^2 undefined")
    ss_res = float(np.sum((truth - prediction) ** 2))
    return 1.0 - ss_res / ss_tot


def trajectory_r_squared(skeleton: Expression, constants, x0: float,
                         t, x_true) -> Optional[float]:
    """R^2 of the integrated candidate trajectory against observations,
    or None when the integration is invalid."""
    solution = integrate_ode(skeleton, constants, x0, t)
    if solution is None:
        return None
    return r_squared(x_true, solution)
