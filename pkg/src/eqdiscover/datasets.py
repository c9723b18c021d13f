"""Benchmark datasets: PDE grids, ODE trajectories, and their file formats.

Grids are t-major (row = one time sample).  Derivative features are always
recomputed from the stored fields with the package's finite-difference
stencils, so a saved and reloaded dataset evaluates identically.
"""

from __future__ import annotations

import hashlib
import io
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import pde_systems
from .errors import FormatError, UnstableIntegrationError
from .expressions import Expression, SymbolLibrary, evaluate
from .numerics import fd_derivative, integrate_ode
from .parsing import parse

GRID_MAGIC = "eqdiscover-grid 1"
FEATURE_ORDERS = {"_x": 1, "_xx": 2, "_xxx": 3, "_xxxx": 4}


# --------------------------------------------------------------------------
# PDE grids

@dataclass
class PdeGrid:
    """Uniform space-time grid with one or more named fields.

    ``features`` holds the spatial derivatives (orders 1..4) and the time
    derivative of every field, plus the broadcast coordinate ``x``; they are
    derived data, never stored on disk.
    """

    name: str
    fields: dict
    x0: float
    dx: float
    t0: float
    dt: float
    periodic: bool = False
    ground_truth: Optional[dict] = None
    target: str = "u_t"
    description: str = ""
    features: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        # contiguous float64 so recomputed features are bit-identical no
        # matter how the field arrays were produced (views, file loads, ...)
        self.fields = {name: np.ascontiguousarray(values, dtype=float)
                       for name, values in self.fields.items()}
        shapes = {f.shape for f in self.fields.values()}
        if len(shapes) != 1:
            raise ValueError("all fields must share one shape")
        if not self.features:
            self.features = compute_features(self.fields, self.dx, self.dt,
                                             self.x0)

    @property
    def n(self) -> int:
        return next(iter(self.fields.values())).shape[0]

    @property
    def m(self) -> int:
        return next(iter(self.fields.values())).shape[1]

    @property
    def x(self) -> np.ndarray:
        return self.x0 + self.dx * np.arange(self.m)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n)

    def env(self) -> dict:
        """Full evaluation environment: fields plus derived features."""
        out = dict(self.fields)
        out.update(self.features)
        return out

    def fingerprint(self) -> str:
        return hashlib.sha256(serialize_grid(self).encode()).hexdigest()


def compute_features(fields: dict, dx: float, dt: float, x0: float) -> dict:
    features = {}
    any_field = next(iter(fields.values()))
    n, m = any_field.shape
    x_row = x0 + dx * np.arange(m)
    features["x"] = np.broadcast_to(x_row, (n, m)).copy()
    for name, values in fields.items():
        for suffix, order in FEATURE_ORDERS.items():
            features[name + suffix] = fd_derivative(values, "space", order, dx)
        features[name + "_t"] = fd_derivative(values, "time", 1, dt)
    return features


_PDE_REGISTRY = {
    "burgers": dict(
        generator=pde_systems.burgers,
        x0=-8.0, dx=16.0 / 256, m=256, periodic=True,
        t=lambda n: np.linspace(0.0, 10.0, n), n=201,
        truth={"u*u_x": -1.0, "u_xx": 0.1},
        description="viscous Burgers equation, u_t = -u*u_x + 0.1*u_xx",
    ),
    "chafee-infante": dict(
        generator=pde_systems.chafee_infante,
        x0=0.0, dx=3.0 / 300, m=301, periodic=False,
        t=lambda n: np.linspace(0.0, 0.5, n), n=200,
        truth={"u_xx": 1.0, "u": 1.0, "u^3": -1.0},
        description="Chafee-Infante equation, u_t = u_xx + u - u^3",
    ),
    "ks": dict(
        generator=pde_systems.kuramoto_sivashinsky,
        x0=-10.0, dx=20.0 / 512, m=512, periodic=True,
        t=lambda n: np.linspace(0.0, 20.0, n), n=256,
        truth={"u*u_x": -1.0, "u_xx": -1.0, "u_xxxx": -1.0},
        description="Kuramoto-Sivashinsky equation, u_t = -u*u_x - u_xx - u_xxxx",
    ),
    "pde-divide": dict(
        generator=pde_systems.pde_divide,
        x0=1.0, dx=1.0 / 100, m=100, periodic=False,
        t=lambda n: np.linspace(0.0, 1.0, n), n=251,
        truth={"u_x/x": -1.0, "u_xx": 0.25},
        description="advection-diffusion with a 1/x coefficient, u_t = -u_x/x + 0.25*u_xx",
    ),
    "fisher-kpp": dict(
        generator=pde_systems.fisher_kpp,
        x0=-0.99, dx=0.01, m=199, periodic=False,
        t=lambda n: np.linspace(0.0, 1.0, n + 2)[1:-1], n=99,
        truth={"u*u_xx": 0.02, "u_x^2": 0.02, "u": 10.0, "u^2": -10.0},
        description="Fisher-KPP equation, u_t = 0.02*u*u_xx + 0.02*u_x^2 + 10*u - 10*u^2",
    ),
}

PDE_SYSTEMS = tuple(_PDE_REGISTRY)

_PDE_ALIASES = {
    "chafee": "chafee-infante", "chafee_infante": "chafee-infante",
    "pde_divide": "pde-divide", "divide": "pde-divide",
    "fisher": "fisher-kpp", "fisher_kpp": "fisher-kpp",
    "kuramoto-sivashinsky": "ks",
}


def generate_pde(system: str, overrides: Optional[dict] = None) -> PdeGrid:
    """Generate a benchmark PDE dataset on its standard discretization.

    ``overrides`` may adjust ``n`` (time samples) and ``oversample`` (the
    generation-resolution multiplier); the spatial grid is fixed by the
    benchmark.  Raises :class:`UnstableIntegrationError` if the integration
    blows up.
    """
    key = system.strip().lower()
    key = _PDE_ALIASES.get(key, key)
    if key not in _PDE_REGISTRY:
        raise KeyError(f"unknown PDE system {system!r}; known: {', '.join(PDE_SYSTEMS)}")
    spec = _PDE_REGISTRY[key]
    overrides = dict(overrides or {})
    n = int(overrides.pop("n", spec["n"]))
    oversample = int(overrides.pop("oversample", pde_systems.OVERSAMPLE))
    if overrides:
        raise ValueError(f"unknown overrides: {sorted(overrides)}")
    x = spec["x0"] + spec["dx"] * np.arange(spec["m"])
    t = spec["t"](n)
    u = spec["generator"](x, t, oversample=oversample)
    return PdeGrid(
        name=key,
        fields={"u": u},
        x0=spec["x0"], dx=spec["dx"],
        t0=float(t[0]), dt=float(t[1] - t[0]),
        periodic=spec["periodic"],
        ground_truth=dict(spec["truth"]),
        description=spec["description"],
    )


# --------------------------------------------------------------------------
# grid file format

def serialize_grid(grid: PdeGrid) -> str:
    header = {
        "name": grid.name,
        "fields": list(grid.fields),
        "n": grid.n, "m": grid.m,
        "x0": grid.x0, "dx": grid.dx, "t0": grid.t0, "dt": grid.dt,
        "periodic": grid.periodic,
        "target": grid.target,
        "ground_truth": grid.ground_truth,
        "description": grid.description,
    }
    buf = io.StringIO()
    buf.write(GRID_MAGIC + "\n")
    buf.write(json.dumps(header, sort_keys=True) + "\n")
    for name in grid.fields:
        for row in grid.fields[name]:
            buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return buf.getvalue()


def save_grid(grid: PdeGrid, path) -> str:
    """Write a grid to disk; returns its content fingerprint."""
    text = serialize_grid(grid)
    with open(path, "w") as handle:
        handle.write(text)
    return hashlib.sha256(text.encode()).hexdigest()


def load_grid(path) -> PdeGrid:
    """Read a grid file; features are recomputed from the stored fields."""
    with open(path) as handle:
        lines = handle.read().splitlines()
    if not lines or lines[0] != GRID_MAGIC:
        raise FormatError(f"not a grid file (expected {GRID_MAGIC!r} header)", line=1)
    try:
        header = json.loads(lines[1])
    except (IndexError, json.JSONDecodeError) as exc:
        raise FormatError(f"bad header: {exc}", line=2) from exc
    for key in ("fields", "n", "m", "x0", "dx", "t0", "dt"):
        if key not in header:
            raise FormatError(f"header missing {key!r}", line=2)
    n, m = int(header["n"]), int(header["m"])
    fields = {}
    cursor = 2
    for name in header["fields"]:
        block = lines[cursor:cursor + n]
        if len(block) < n:
            raise FormatError(
                f"field {name!r} truncated: expected {n} rows", line=cursor + 1)
        rows = []
        for offset, text in enumerate(block):
            row = np.array([float(v) for v in text.split(",")])
            if row.size != m:
                raise FormatError(
                    f"field {name!r} row has {row.size} values, expected {m}",
                    line=cursor + offset + 1)
            rows.append(row)
        fields[name] = np.array(rows)
        cursor += n
    return PdeGrid(
        name=header.get("name", "grid"),
        fields=fields,
        x0=float(header["x0"]), dx=float(header["dx"]),
        t0=float(header["t0"]), dt=float(header["dt"]),
        periodic=bool(header.get("periodic", False)),
        ground_truth=header.get("ground_truth"),
        target=header.get("target", "u_t"),
        description=header.get("description", ""),
    )


# --------------------------------------------------------------------------
# ODE trajectories

@dataclass(frozen=True)
class OdeGroundTruth:
    equation: str            # right-hand side with numeric parameters inline
    parameters: tuple
    ic_train: float
    ic_test: float
    description: str = ""


@dataclass
class OdeTrajectory:
    t: np.ndarray
    x: np.ndarray
    xdot: np.ndarray
    initial_condition: float
    system_id: Optional[int] = None
    ground_truth: Optional[OdeGroundTruth] = None
    description: str = ""

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.xdot = np.asarray(self.xdot, dtype=float)
        if not (self.t.size == self.x.size == self.xdot.size):
            raise ValueError("t, x, xdot must have equal lengths")
        if np.any(np.diff(self.t) <= 0):
            raise ValueError("t must be strictly increasing")

    def fingerprint(self) -> str:
        return hashlib.sha256(serialize_trajectory(self).encode()).hexdigest()


# Scalar benchmark systems: id -> (description, rhs with parameters inline,
# parameters, train IC, test IC).
ODEBENCH = {
    1: ("RC circuit (charging capacitor)",
        "(0.7 - x/1.2)/2.31", (0.7, 1.2, 2.31), 10.0, 3.54),
    2: ("population growth with carrying capacity",
        "0.79*x*(1 - x/74.3)", (0.79, 74.3), 7.3, 21.0),
    3: ("RC circuit with non-linear resistor",
        "-0.5 + 1/(exp(0.5 - x/0.96) + 1)", (0.5, 0.96), 0.8, 0.02),
    4: ("velocity of a falling object with air resistance",
        "9.81 - 0.0021175*x^2", (9.81, 0.0021175), 0.5, 73.0),
    5: ("Gompertz law for tumor growth",
        "0.032*x*log(2.29*x)", (0.032, 2.29), 1.73, 9.5),
    6: ("logistic equation with Allee effect",
        "0.14*x*(-1 + x/4.4)*(1 - x/130.0)", (0.14, 130.0, 4.4), 6.123, 2.1),
    7: ("refined language death model for two languages",
        "0.2*x^1.2*(1 - x) - x*(1 - 0.2)*(1 - x)^1.2", (0.2, 1.2), 0.83, 0.34),
    8: ("overdamped bead on a rotating hoop",
        "0.0981*(9.7*cos(x) - 1)*sin(x)", (0.0981, 9.7), 3.1, 2.4),
    9: ("budworm outbreak with predation (dimensionless)",
        "0.4*x*(1 - x/95.0) - x^2/(x^2 + 1)", (0.4, 95.0), 44.3, 4.5),
    10: ("Landau equation (typical time scale tau = 1)",
         "0.1*x + 0.04*x^3 - 0.001*x^5", (0.1, -0.04, 0.001), 0.94, 1.65),
    11: ("improved logistic equation with harvesting/fishing",
         "0.4*x*(1 - x/100.0) - 0.24*x/(50.0 + x)", (0.4, 100.0, 0.24, 50.0), 21.1, 44.1),
    12: ("improved logistic equation with harvesting/fishing (dimensionless)",
         "-0.08*x/(0.8 + x) + x*(1 - x)", (0.08, 0.8), 0.13, 0.03),
    13: ("autocatalytic gene switching (dimensionless)",
         "0.1 - 0.55*x + x^2/(x^2 + 1)", (0.1, 0.55), 0.002, 0.25),
    14: ("dimensionally reduced SIR infection model (dimensionless)",
         "1.2 - 0.2*x - exp(-x)", (1.2, 0.2), 0.0, 0.8),
    15: ("hysteretic activation of protein expression",
         "1.4 + 0.4*x^5/(123.0 + x^5) - 0.89*x", (1.4, 0.4, 123.0, 0.89), 3.1, 6.3),
    16: ("overdamped pendulum with constant driving torque (dimensionless)",
         "0.21 - sin(x)", (0.21,), -2.74, 1.65),
}


def odebench_truth(system_id: int) -> OdeGroundTruth:
    if system_id not in ODEBENCH:
        raise KeyError(f"unknown ODE system id {system_id}; valid ids are 1..16")
    description, equation, params, ic_train, ic_test = ODEBENCH[system_id]
    return OdeGroundTruth(equation=equation, parameters=tuple(params),
                          ic_train=ic_train, ic_test=ic_test,
                          description=description)


def truth_expression(truth: OdeGroundTruth) -> Expression:
    lib = SymbolLibrary.ode_default()
    return parse(truth.equation, lib, literals="keep")


def generate_odebench(system_id: int, which_ic: str = "train",
                      t_span: tuple = (0.0, 10.0),
                      n_points: int = 512) -> OdeTrajectory:
    """Integrate one benchmark ODE from the requested initial condition.

    The time derivative is evaluated analytically from the ground-truth
    right-hand side, not by differencing the trajectory.
    """
    truth = odebench_truth(system_id)
    if which_ic not in ("train", "test"):
        raise ValueError("which_ic must be 'train' or 'test'")
    x0 = truth.ic_train if which_ic == "train" else truth.ic_test
    expr = truth_expression(truth)
    t = np.linspace(t_span[0], t_span[1], n_points)
    x = integrate_ode(expr, None, x0, t, rtol=1e-10, atol=1e-12)
    if x is None:
        raise UnstableIntegrationError(
            f"ODE system {system_id} failed to integrate from x0={x0}")
    xdot = np.asarray(evaluate(expr.root, {"x": x}), dtype=float)
    return OdeTrajectory(t=t, x=x, xdot=xdot, initial_condition=x0,
                         system_id=system_id, ground_truth=truth,
                         description=truth.description)


# --------------------------------------------------------------------------
# trajectory file format

def serialize_trajectory(traj: OdeTrajectory) -> str:
    buf = io.StringIO()
    meta = {"initial_condition": traj.initial_condition}
    if traj.system_id is not None:
        meta["system_id"] = traj.system_id
    if traj.description:
        meta["description"] = traj.description
    if traj.ground_truth is not None:
        meta["ground_truth"] = {
            "equation": traj.ground_truth.equation,
            "parameters": list(traj.ground_truth.parameters),
            "ic_train": traj.ground_truth.ic_train,
            "ic_test": traj.ground_truth.ic_test,
            "description": traj.ground_truth.description,
        }
    buf.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    buf.write("t,x,xdot\n")
    for row in zip(traj.t, traj.x, traj.xdot):
        buf.write(",".join(f"{v:.17g}" for v in row) + "\n")
    return buf.getvalue()


def save_trajectory(traj: OdeTrajectory, path) -> str:
    text = serialize_trajectory(traj)
    with open(path, "w") as handle:
        handle.write(text)
    return hashlib.sha256(text.encode()).hexdigest()


def load_trajectory(path) -> OdeTrajectory:
    with open(path) as handle:
        lines = handle.read().splitlines()
    meta = {}
    cursor = 0
    if lines and lines[0].startswith("#"):
        try:
            meta = json.loads(lines[0][1:].strip())
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad metadata comment: {exc}", line=1) from exc
        cursor = 1
    if cursor >= len(lines) or lines[cursor].replace(" ", "") != "t,x,xdot":
        raise FormatError("expected 't,x,xdot' header", line=cursor + 1)
    cursor += 1
    rows = []
    for offset, text in enumerate(lines[cursor:]):
        if not text.strip():
            continue
        parts = text.split(",")
        if len(parts) != 3:
            raise FormatError(f"expected 3 columns, found {len(parts)}",
                              line=cursor + offset + 1)
        rows.append([float(v) for v in parts])
    if not rows:
        raise FormatError("no data rows", line=cursor + 1)
    data = np.array(rows)
    truth = None
    if "ground_truth" in meta:
        gt = meta["ground_truth"]
        truth = OdeGroundTruth(
            equation=gt["equation"], parameters=tuple(gt["parameters"]),
            ic_train=gt["ic_train"], ic_test=gt["ic_test"],
            description=gt.get("description", ""))
    return OdeTrajectory(
        t=data[:, 0], x=data[:, 1], xdot=data[:, 2],
        initial_condition=float(meta.get("initial_condition", data[0, 1])),
        system_id=meta.get("system_id"),
        ground_truth=truth,
        description=meta.get("description", ""))
