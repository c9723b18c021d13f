"""Dense numerical kernels: finite differences, (ST)ridge regression,
quasi-Newton constant fitting, and adaptive ODE integration.

Matrices and vectors are plain float64 numpy arrays.  Regression inputs must
be finite; callers filter non-finite rows before calling in.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import solve_ivp
from scipy.optimize import minimize

from .errors import (
    AllCoefficientsEliminatedError,
    GridTooSmallError,
    NoFiniteStartError,
    SingularSystemError,
)
from .expressions import Expression, const_inits, evaluate

BLOWUP_LIMIT = 1e12

_AXES = {"space": -1, "time": 0}


def fd_weights(z: float, nodes, order: int) -> np.ndarray:
    """Fornberg finite-difference weights for the ``order``-th derivative at
    point ``z`` given grid ``nodes``."""
    x = np.asarray(nodes, dtype=float)
    n = len(x)
    c = np.zeros((n, order + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def fd_derivative(values, axis: str, order: int, spacing: float) -> np.ndarray:
    """Differentiate grid values along an axis on a uniform grid.

    Central stencils of 2nd-order accuracy in the interior (3-point for
    orders 1-2, 5-point for orders 3-4); one-sided 2nd-order stencils at the
    boundaries.  Output has the same shape as the input.
    """
    if order not in (1, 2, 3, 4):
        raise ValueError(f"derivative order {order} unsupported (1..4)")
    if axis not in _AXES:
        raise ValueError(f"axis must be 'space' or 'time', got {axis!r}")
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    values = np.asarray(values, dtype=float)
    work = np.moveaxis(values, _AXES[axis], -1) if values.ndim > 1 else values
    n = work.shape[-1]
    if n < order + 3:
        raise GridTooSmallError(
            f"need at least {order + 3} points along {axis}, have {n}")

    out = np.empty_like(work)
    radius = 1 if order <= 2 else 2
    offsets = np.arange(-radius, radius + 1)
    weights = fd_weights(0.0, offsets, order)
    interior = np.zeros_like(work[..., radius:n - radius])
    for w, off in zip(weights, offsets):
        if w != 0.0:
            interior += w * work[..., radius + off:n - radius + off]
    out[..., radius:n - radius] = interior

    width = order + 2  # one-sided window size for 2nd-order accuracy
    for i in range(radius):
        w_left = fd_weights(float(i), np.arange(width), order)
        w_right = fd_weights(float(n - 1 - i), np.arange(n - width, n), order)
        out[..., i] = work[..., :width] @ w_left
        out[..., n - 1 - i] = work[..., n - width:] @ w_right

    out /= spacing ** order
    return np.moveaxis(out, -1, _AXES[axis]) if values.ndim > 1 else out


def ridge(theta: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """argmin |theta @ xi - y|^2 + lam |xi|^2 via the normal equations,
    solved with a symmetric positive-definite factorization."""
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if theta.ndim != 2 or theta.shape[0] != y.size:
        raise ValueError("theta must be 2-D with one row per entry of y")
    if theta.shape[1] > theta.shape[0]:
        raise ValueError("more columns than rows")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    gram = theta.T @ theta
    if lam > 0:
        gram = gram + lam * np.eye(theta.shape[1])
    rhs = theta.T @ y
    try:
        factor = scipy.linalg.cho_factor(gram)
    except scipy.linalg.LinAlgError as exc:
        raise SingularSystemError(f"normal equations are singular: {exc}") from exc
    return scipy.linalg.cho_solve(factor, rhs)


def stridge(theta: np.ndarray, y: np.ndarray, lam: float, threshold: float,
            max_iter: int = 10) -> np.ndarray:
    """Sequentially thresholded ridge regression.

    Iterates ridge fits, zeroing coefficients with magnitude below
    ``threshold`` and refitting on the surviving columns until the support
    is stable (or ``max_iter``).  The surviving coefficients are refit with
    plain least squares at the end so the regularization biases support
    selection only.  Returns a full-length vector with zeros on eliminated
    columns.
    """
    theta = np.asarray(theta, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    p = theta.shape[1]
    active = np.arange(p)
    xi_active = ridge(theta, y, lam)
    for _ in range(max_iter):
        keep = np.abs(xi_active) >= threshold
        if keep.all():
            break
        active = active[keep]
        if active.size == 0:
            raise AllCoefficientsEliminatedError(
                f"threshold {threshold:g} removed every column")
        xi_active = ridge(theta[:, active], y, lam)
    xi = np.zeros(p)
    xi[active], *_ = np.linalg.lstsq(theta[:, active], y, rcond=None)
    return xi


@dataclass
class FitResult:
    """Outcome of a constant fit: the vector, its loss, and bookkeeping."""

    constants: np.ndarray
    objective: float
    converged: bool
    n_evals: int


def _trajectory_arrays(data):
    if hasattr(data, "x") and hasattr(data, "xdot"):
        return np.asarray(data.x, dtype=float), np.asarray(data.xdot, dtype=float)
    x, xdot = data
    return np.asarray(x, dtype=float), np.asarray(xdot, dtype=float)


def mse_objective(expr: Expression, x: np.ndarray, xdot: np.ndarray):
    """Mean squared error of the expression's prediction of xdot, as a
    callable of the constant vector.  Non-finite losses map to +inf."""
    env = {"x": x}

    def objective(xi):
        pred = evaluate(expr.root, env, xi)
        with np.errstate(all="ignore"):
            residual = xdot - pred
            loss = float(np.mean(residual * residual))
        return loss if np.isfinite(loss) else np.inf

    return objective


def forward_diff_gradient(fun, xi, f0=None):
    """Forward-difference gradient with per-component scaled steps."""
    xi = np.asarray(xi, dtype=float)
    if f0 is None:
        f0 = fun(xi)
    grad = np.empty_like(xi)
    for i in range(xi.size):
        h = np.sqrt(np.finfo(float).eps) * (1.0 + abs(xi[i]))
        stepped = xi.copy()
        stepped[i] += h
        grad[i] = (fun(stepped) - f0) / h
    return grad


def fit_constants(expr: Expression, data, restarts: int = 10, seed: int = 0,
                  max_iter: int = 200) -> FitResult:
    """Fit the constant placeholders of a skeleton to a trajectory.

    Minimizes the mean squared error between xdot and the skeleton's
    prediction with BFGS (finite-difference gradients), over ``restarts``
    independent starts: one start carries literal values recorded in the
    skeleton (1.0 where unknown), the rest are standard normal draws.
    """
    n_const = expr.n_constants
    if n_const < 1:
        raise ValueError("skeleton has no constants to fit")
    x, xdot = _trajectory_arrays(data)
    objective = mse_objective(expr, x, xdot)

    evals = [0]

    def counted(xi):
        evals[0] += 1
        return objective(xi)

    rng = np.random.default_rng(seed)
    carried = np.array([v if v is not None else 1.0 for v in const_inits(expr.root)])
    starts = [carried] + [rng.standard_normal(n_const) for _ in range(max(0, restarts - 1))]

    best = None
    converged = False
    for start in starts:
        if not np.isfinite(counted(start)):
            continue
        res = minimize(counted, start, method="BFGS",
                       jac=lambda xi: forward_diff_gradient(counted, xi),
                       options={"maxiter": max_iter})
        if not np.isfinite(res.fun):
            continue
        converged = converged or bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise NoFiniteStartError(
            f"no restart of {restarts} produced a finite loss")
    return FitResult(constants=np.asarray(best.x, dtype=float),
                     objective=float(best.fun),
                     converged=converged,
                     n_evals=evals[0])


def integrate_ode(expr: Expression, constants, x0: float, t_grid,
                  rtol: float = 1e-6, atol: float = 1e-8):
    """Integrate dx/dt = F(x; constants) through ``t_grid`` with an adaptive
    embedded Runge-Kutta 4(5) pair.

    Returns the solution sampled at ``t_grid``, or None when the candidate
    is numerically invalid (step-size underflow, non-finite state, or |x|
    beyond the blow-up guard).  None is a value, not an error: the caller
    scores the candidate as failed.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    constants = None if constants is None else np.asarray(constants, dtype=float)
    n_const = expr.n_constants
    if n_const and (constants is None or len(constants) != n_const):
        raise ValueError(f"expected {n_const} constants")

    def rhs(t, state):
        with np.errstate(all="ignore"):
            value = evaluate(expr.root, {"x": state[0]}, constants)
        return [float(value)]

    def blowup(t, state):
        return abs(state[0]) - BLOWUP_LIMIT

    blowup.terminal = True

    try:
        with np.errstate(all="ignore"):
            sol = solve_ivp(rhs, (t_grid[0], t_grid[-1]), [float(x0)],
                            method="RK45", t_eval=t_grid, rtol=rtol, atol=atol,
                            events=[blowup])
    except (ValueError, FloatingPointError, OverflowError):
        return None
    if not sol.success or sol.y.shape[1] != t_grid.size:
        return None
    trajectory = sol.y[0]
    if not np.all(np.isfinite(trajectory)):
        return None
    return trajectory
