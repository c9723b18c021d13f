"""Command-line interface: gen-data, discover, eval, report.

Exit codes: 2 bad arguments or unparseable expression, 3 data/generation
errors, 4 transport failure (after the failing iteration is logged).
"""

from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import click
import numpy as np

from . import datasets
from .backends import (
    BackendConfig,
    LiveBackend,
    MockBackend,
    RecordingBackend,
    ReplayBackend,
)
from .config import backend_config, eval_config, load_config, search_config
from .errors import (
    EqDiscoverError,
    ExpressionSyntaxError,
    FormatError,
    LibraryViolationError,
    TransportError,
    UnstableIntegrationError,
)
from .evaluation import compare_to_truth, evaluate_candidate, trajectory_r_squared
from .expressions import SymbolLibrary
from .parsing import parse
from .search import SCHEDULES, run_search

GRID_SUFFIX = ".grid"
TRAJ_SUFFIX = ".traj"


@click.group()
def main():
    """Discover governing equations (ODEs and PDEs) from data."""


# --------------------------------------------------------------------------
# gen-data

@main.command("gen-data")
@click.argument("kind", type=click.Choice(["pde", "ode"]))
@click.argument("name")
@click.option("--ic", type=click.Choice(["train", "test"]), default="train",
              show_default=True, help="initial condition set (ode only)")
@click.option("--t-max", type=float, default=10.0, show_default=True,
              help="time span end (ode only)")
@click.option("--n-points", type=int, default=512, show_default=True,
              help="samples along the trajectory (ode only)")
@click.option("-o", "--out", type=click.Path(file_okay=False), default=".",
              show_default=True, help="output directory")
def cmd_gen_data(kind, name, ic, t_max, n_points, out):
    """Generate a benchmark dataset: a PDE system by name, or an ODE by id."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        if kind == "pde":
            try:
                grid = datasets.generate_pde(name)
            except KeyError as err:
                raise click.UsageError(str(err)) from err
            path = out_dir / f"{grid.name}{GRID_SUFFIX}"
            fingerprint = datasets.save_grid(grid, path)
            click.echo(f"wrote {path} ({grid.n} x {grid.m} grid, fields: "
                       f"{', '.join(grid.fields)})")
        else:
            try:
                system_id = int(name)
            except ValueError:
                raise click.UsageError(f"ode id must be an integer, got {name!r}")
            try:
                traj = datasets.generate_odebench(system_id, ic,
                                                  t_span=(0.0, t_max),
                                                  n_points=n_points)
            except KeyError as err:
                raise click.UsageError(str(err)) from err
            path = out_dir / f"ode-{system_id}-{ic}{TRAJ_SUFFIX}"
            fingerprint = datasets.save_trajectory(traj, path)
            click.echo(f"wrote {path} ({traj.t.size} samples, x0={traj.initial_condition})")
        (out_dir / (path.name + ".sha256")).write_text(fingerprint + "\n")
        click.echo(f"fingerprint {fingerprint}")
    except (UnstableIntegrationError, EqDiscoverError) as err:
        click.echo(f"generation failed: {err}", err=True)
        sys.exit(3)


# --------------------------------------------------------------------------
# shared data loading

def _load_dataset(path: str):
    """Sniff and load a dataset file; returns (data, mode)."""
    try:
        with open(path) as handle:
            first = handle.readline().rstrip("\n")
    except OSError as err:
        raise FormatError(str(err))
    if first == datasets.GRID_MAGIC:
        return datasets.load_grid(path), "pde"
    return datasets.load_trajectory(path), "ode"


def _library_for(mode: str, data) -> SymbolLibrary:
    if mode == "ode":
        return SymbolLibrary.ode_default()
    names = tuple(data.fields)
    operands = []
    for name in names:
        operands.append(name)
        operands.extend(f"{name}{suffix}" for suffix in ("_x", "_xx", "_xxx", "_xxxx"))
    operands.append("x")
    return SymbolLibrary.pde_default(operands=tuple(operands))


def _make_backend(spec: str, cfg: BackendConfig, record: str | None):
    if spec == "native-only":
        return None
    if spec == "live":
        backend = LiveBackend(cfg)
    elif spec.startswith("replay:"):
        backend = ReplayBackend.from_file(spec.split(":", 1)[1])
    elif spec.startswith("mock:"):
        backend = MockBackend.from_file(spec.split(":", 1)[1])
    else:
        raise click.UsageError(
            f"backend must be live, native-only, replay:PATH or mock:PATH, got {spec!r}")
    if record:
        backend = RecordingBackend(backend, record, model=cfg.model_name,
                                   temperature=cfg.temperature)
    return backend


# --------------------------------------------------------------------------
# discover

def _write_report(record, data, out_dir: Path) -> Path:
    lines = [f"stop reason: {record.stop_reason}",
             f"iterations: {len(record.iterations)}"]
    best = record.best
    if best is None:
        lines.append("no valid candidate found")
    else:
        lines.append(f"best equation: {best['equation']}")
        if best["terms"]:
            for term, coef in zip(best["terms"], best["constants"]):
                lines.append(f"  {term}: {coef:.6g}")
        else:
            for i, coef in enumerate(best["constants"]):
                lines.append(f"  c{i} = {coef:.6g}")
        lines.append(f"score S: {best['score']:.6f}")
        lines.append(f"NRMSE: {best['nrmse']:.6g}")
        lines.append(f"terms m: {best['m']}")
        truth = getattr(data, "ground_truth", None)
        if truth and isinstance(truth, dict):
            found = dict(zip(best["terms"], best["constants"]))
            if set(found) == set(truth):
                keys = sorted(truth)
                err = float(np.mean([abs(found[k] - truth[k]) / abs(truth[k])
                                     for k in keys]) * 100.0)
                lines.append(f"coefficient error E: {err:.4f}%")
            else:
                lines.append("coefficient error E: structure not recovered")
    report_path = out_dir / "report.txt"
    report_path.write_text("\n".join(lines) + "\n")

    with open(out_dir / "trace.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["iteration", "strategy", "best_score"])
        for it in record.iterations:
            writer.writerow([it.index, it.strategy,
                             "" if it.best_score is None else repr(it.best_score)])
    return report_path


@main.command("discover")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--backend", "backend_spec", default="native-only", show_default=True,
              help="live | native-only | replay:PATH | mock:PATH")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=None)
@click.option("--out", type=click.Path(file_okay=False), default="run-out", show_default=True)
@click.option("--schedule", type=click.Choice(SCHEDULES), default=None)
@click.option("--max-iters", type=int, default=None, help="override P")
@click.option("--target-score", type=float, default=None)
@click.option("--record", type=click.Path(dir_okay=False), default=None,
              help="append live exchanges to this replay transcript")
def cmd_discover(data_path, backend_spec, config_path, seed, out, schedule,
                 max_iters, target_score, record):
    """Run the discovery loop against a dataset file."""
    out_dir = Path(out)
    out_dir.mkdir(parents=True, exist_ok=True)
    config = load_config(config_path)
    try:
        data, mode = _load_dataset(data_path)
    except (FormatError, EqDiscoverError) as err:
        click.echo(f"data error: {err}", err=True)
        sys.exit(3)
    lib = _library_for(mode, data)
    scfg = search_config(config, seed=seed, schedule=schedule, P=max_iters,
                         target_score=target_score)
    ecfg = eval_config(config, mode)
    backend = _make_backend(backend_spec, backend_config(config), record)
    run_path = out_dir / "run.jsonl"
    try:
        result = run_search(data, lib, scfg, backend, ecfg, record_path=run_path)
    except TransportError as err:
        click.echo(f"transport failure: {err}", err=True)
        sys.exit(4)
    (out_dir / "queue.json").write_text(
        json.dumps(result.final_queue, indent=2, sort_keys=True) + "\n")
    report_path = _write_report(result, data, out_dir)
    click.echo(report_path.read_text().rstrip("\n"))
    click.echo(f"run record: {run_path}")


# --------------------------------------------------------------------------
# eval

@main.command("eval")
@click.argument("expression")
@click.option("--data", "data_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int, default=0, show_default=True)
def cmd_eval(expression, data_path, config_path, seed):
    """Score a single expression against a dataset."""
    config = load_config(config_path)
    try:
        data, mode = _load_dataset(data_path)
    except (FormatError, EqDiscoverError) as err:
        click.echo(f"data error: {err}", err=True)
        sys.exit(3)
    lib = _library_for(mode, data)
    try:
        skeleton = parse(expression, lib)
    except (ExpressionSyntaxError, LibraryViolationError) as err:
        click.echo(f"cannot parse expression: {err}", err=True)
        sys.exit(2)
    ecfg = eval_config(config, mode)
    candidate = evaluate_candidate(skeleton, data, ecfg, run_seed=seed)
    if not candidate.is_valid:
        click.echo(f"candidate invalid: {candidate.detail}")
        return
    click.echo(f"equation: {candidate.key}")
    if candidate.terms:
        for term, coef in zip(candidate.terms, candidate.constants):
            click.echo(f"  {term}: {coef:.6g}")
    else:
        for i, coef in enumerate(candidate.constants):
            click.echo(f"  c{i} = {coef:.6g}")
    click.echo(f"NRMSE: {candidate.nrmse:.6g}")
    click.echo(f"terms m: {candidate.term_count}")
    click.echo(f"score S: {candidate.score:.6f}")
    if mode == "pde" and isinstance(getattr(data, "ground_truth", None), dict):
        err = compare_to_truth(candidate, data.ground_truth)
        click.echo("coefficient error E: " +
                   ("structure not recovered" if err is None else f"{err:.4f}%"))
    if mode == "ode" and data.ground_truth is not None:
        truth = data.ground_truth
        truth_expr = datasets.truth_expression(truth)
        for label, x0 in (("train", truth.ic_train), ("test", truth.ic_test)):
            reference = datasets.generate_odebench(
                data.system_id, label, t_span=(float(data.t[0]), float(data.t[-1])),
                n_points=data.t.size) if data.system_id else None
            if reference is None:
                break
            if candidate.terms:
                from .evaluation import candidate_prediction, r_squared
                from scipy.integrate import solve_ivp

                def rhs(_, state):
                    return [float(candidate_prediction(candidate, {"x": state[0]}))]
                sol = solve_ivp(rhs, (reference.t[0], reference.t[-1]), [x0],
                                t_eval=reference.t, rtol=1e-6, atol=1e-8)
                r2 = (r_squared(reference.x, sol.y[0])
                      if sol.success and sol.y.shape[1] == reference.t.size else None)
            else:
                r2 = trajectory_r_squared(candidate.skeleton, candidate.constants,
                                          x0, reference.t, reference.x)
            click.echo(f"R^2 ({label}): " + ("invalid" if r2 is None else f"{r2:.6f}"))


# --------------------------------------------------------------------------
# report

@main.command("report")
@click.option("--run", "run_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="also rewrite report.txt/trace.csv into this directory")
def cmd_report(run_path, out):
    """Summarize a persisted run record."""
    from .search import RunRecord

    record = RunRecord.from_jsonl(run_path)
    best = record.best
    click.echo(f"stop reason: {record.stop_reason}")
    click.echo(f"iterations: {len(record.iterations)}")
    if best is not None:
        click.echo(f"best equation: {best['equation']}")
        click.echo(f"score S: {best['score']:.6f}")
    strategies = [it.strategy for it in record.iterations]
    click.echo("strategies: " + " ".join(strategies))
    trace = record.best_score_trace()
    click.echo("best-score trace: " +
               " ".join("-" if s is None else f"{s:.4f}" for s in trace))
    if out is not None:
        out_dir = Path(out)
        out_dir.mkdir(parents=True, exist_ok=True)

        class _NoTruth:
            ground_truth = None
        _write_report(record, _NoTruth(), out_dir)
        click.echo(f"wrote {out_dir / 'report.txt'} and {out_dir / 'trace.csv'}")


if __name__ == "__main__":
    main()
