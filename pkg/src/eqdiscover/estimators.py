"""Estimator-style wrappers so discovery composes with the wider ecosystem.

``OdeDiscovery.fit(t, x)`` and ``PdeDiscovery.fit(grid)`` run the search
loop and expose the winning equation through fitted attributes; both
inherit ``get_params``/``set_params`` from scikit-learn's BaseEstimator, so
they drop into pipelines, grid searches and clone() like any other
estimator.  The functional core (run_search and friends) stays importable
on its own.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import column_or_1d

from .datasets import OdeTrajectory, PdeGrid, load_grid
from .evaluation import EvalConfig, candidate_prediction
from .expressions import SymbolLibrary
from .numerics import fd_derivative, integrate_ode
from .search import SearchConfig, run_search


class _DiscoveryMixin:
    """Shared search plumbing; subclasses provide mode, library and data."""

    def _search_config(self) -> SearchConfig:
        return SearchConfig(
            M=self.M, P=self.P, K=self.K, seed=self.seed,
            schedule=self.schedule, target_score=self.target_score,
            fallback_enabled=self.fallback_enabled,
            stagnation_limit=self.stagnation_limit,
            max_workers=self.max_workers)

    def _eval_config(self, mode: str) -> EvalConfig:
        return EvalConfig(mode=mode, zeta1=self.zeta1, lam=self.lam,
                          n_term_max=self.n_term_max, restarts=self.restarts)

    def _run(self, data, lib: SymbolLibrary, mode: str):
        record = run_search(data, lib, self._search_config(), self.backend,
                            self._eval_config(mode))
        if not record.final_queue:
            raise RuntimeError(
                "search produced no valid candidate; widen the budget or check the data")
        self.run_record_ = record
        self.library_ = lib
        best = record.final_queue[0]
        self.equation_ = best["equation"]
        self.constants_ = np.asarray(best["constants"], dtype=float)
        self.terms_ = tuple(best["terms"])
        self.nrmse_ = best["nrmse"]
        self.score_ = best["score"]
        # keep the live Candidate for prediction
        self._best_candidate = self._recover_candidate(data, lib, mode, best)
        return self

    def _recover_candidate(self, data, lib, mode, best):
        from .evaluation import evaluate_candidate
        from .parsing import parse
        skeleton = parse(best["equation"], lib,
                         literals="keep" if not lib.allows_const else None)
        return evaluate_candidate(skeleton, data, self._eval_config(mode),
                                  run_seed=self.seed, provenance="init")


class OdeDiscovery(_DiscoveryMixin, BaseEstimator):
    """Discover dx/dt = F(x) from one observed trajectory.

    Parameters follow the search and evaluation defaults; ``backend`` is
    any chat backend (None runs the purely native genetic search).  After
    ``fit``, ``equation_`` holds the winning form, ``constants_`` its
    fitted constants, and ``predict`` maps states x to estimated dx/dt.
    """

    def __init__(self, backend=None, M: int = 10, P: int = 100, K: int = 5,
                 seed: int = 0, schedule: str = "alternate",
                 zeta1: float = 0.01, lam: float = 0.001, n_term_max: int = 6,
                 restarts: int = 10, target_score: Optional[float] = None,
                 fallback_enabled: bool = True, stagnation_limit: int = 25,
                 max_workers: int = 4):
        self.backend = backend
        self.M = M
        self.P = P
        self.K = K
        self.seed = seed
        self.schedule = schedule
        self.zeta1 = zeta1
        self.lam = lam
        self.n_term_max = n_term_max
        self.restarts = restarts
        self.target_score = target_score
        self.fallback_enabled = fallback_enabled
        self.stagnation_limit = stagnation_limit
        self.max_workers = max_workers

    def fit(self, X, y, xdot=None):
        """Fit from sample times ``X`` and states ``y`` (xdot is derived by
        finite differences when not supplied)."""
        t = column_or_1d(np.asarray(X, dtype=float).squeeze(), warn=False)
        x = column_or_1d(np.asarray(y, dtype=float).squeeze(), warn=False)
        if t.shape != x.shape:
            raise ValueError("X (times) and y (states) must align")
        if xdot is None:
            spacing = float(t[1] - t[0])
            if not np.allclose(np.diff(t), spacing):
                raise ValueError("finite-difference xdot needs uniform sampling")
            xdot = fd_derivative(x, "time", 1, spacing)
        trajectory = OdeTrajectory(t=t, x=x, xdot=np.asarray(xdot, dtype=float),
                                   initial_condition=float(x[0]))
        return self._run(trajectory, SymbolLibrary.ode_default(), "ode")

    def predict(self, X):
        """Estimated dx/dt at the given states."""
        x = column_or_1d(np.asarray(X, dtype=float).squeeze(), warn=False)
        return candidate_prediction(self._best_candidate, {"x": x})

    def solve(self, x0: float, t):
        """Integrate the discovered equation from ``x0`` over ``t`` (None if
        the integration is invalid)."""
        cand = self._best_candidate
        if cand.terms:
            return self._solve_linear(x0, t)
        return integrate_ode(cand.skeleton, cand.constants, x0,
                             np.asarray(t, dtype=float))

    def _solve_linear(self, x0, t):
        from scipy.integrate import solve_ivp
        cand = self._best_candidate

        def rhs(_, state):
            return [float(candidate_prediction(cand, {"x": state[0]}))]

        sol = solve_ivp(rhs, (t[0], t[-1]), [float(x0)], t_eval=np.asarray(t),
                        method="RK45", rtol=1e-6, atol=1e-8)
        if not sol.success or sol.y.shape[1] != len(t):
            return None
        return sol.y[0]


class PdeDiscovery(_DiscoveryMixin, BaseEstimator):
    """Discover u_t as a sparse combination of field terms from a grid."""

    def __init__(self, backend=None, M: int = 10, P: int = 100, K: int = 5,
                 seed: int = 0, schedule: str = "alternate",
                 zeta1: float = 0.01, lam: float = 0.001, n_term_max: int = 6,
                 restarts: int = 10, target_score: Optional[float] = None,
                 fallback_enabled: bool = True, stagnation_limit: int = 25,
                 max_workers: int = 4,
                 operands: tuple = ("u", "x", "u_x", "u_xx", "u_xxx", "u_xxxx")):
        self.backend = backend
        self.M = M
        self.P = P
        self.K = K
        self.seed = seed
        self.schedule = schedule
        self.zeta1 = zeta1
        self.lam = lam
        self.n_term_max = n_term_max
        self.restarts = restarts
        self.target_score = target_score
        self.fallback_enabled = fallback_enabled
        self.stagnation_limit = stagnation_limit
        self.max_workers = max_workers
        self.operands = operands

    def fit(self, X, y=None):
        """Fit from a :class:`PdeGrid` (or a path to a saved grid file)."""
        grid = load_grid(X) if isinstance(X, (str, bytes)) else X
        if not isinstance(grid, PdeGrid):
            raise TypeError("X must be a PdeGrid or a path to a grid file")
        lib = SymbolLibrary.pde_default(operands=tuple(self.operands))
        return self._run(grid, lib, "pde")

    def predict(self, X):
        """Estimated u_t over a grid (or environment dict of named arrays)."""
        env = X.env() if isinstance(X, PdeGrid) else dict(X)
        return candidate_prediction(self._best_candidate, env)
