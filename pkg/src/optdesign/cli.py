"""Command-line front end.

Exit codes: 0 on success, 2 for parse/schema problems, 3 when the instance is
infeasible or no critical points were found, 4 for numerical failures
(projection or Newton breakdown, flow that cannot reach its target).
"""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import numpy as np

from .analysis import Verdict, analyze as analyze_problem
from .critical import morse_certify, solve_critical_points
from .errors import (
    ConstraintQualificationError,
    EmptyCatalogError,
    ExpressionError,
    FlowError,
    MorseRepairError,
    ProjectionError,
    SchemaError,
    UnknownAlternativeError,
)
from .flow import FlowConfig, integrate_flow, trajectory_to_csv
from .manifold import load_problem, project_to_y, save_problem, with_target
from .perturb import morse_repair
from .scf import FiniteAlternatives, build_scf

_EXIT_SCHEMA = 2
_EXIT_INFEASIBLE = 3
_EXIT_NUMERICAL = 4


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _handled(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (SchemaError, ExpressionError, UnknownAlternativeError, ValueError) as exc:
            _fail(_EXIT_SCHEMA, str(exc))
        except EmptyCatalogError as exc:
            _fail(_EXIT_INFEASIBLE, str(exc))
        except (ProjectionError, ConstraintQualificationError, FlowError, MorseRepairError) as exc:
            _fail(_EXIT_NUMERICAL, str(exc))

    return wrapper


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        click.echo(text, nl=False)


def _overrides(ctx, names):
    """Parameters the user set on the command line, verbatim, for provenance."""
    from click.core import ParameterSource

    found = {}
    for name in names:
        if ctx.get_parameter_source(name) == ParameterSource.COMMANDLINE:
            value = ctx.params[name]
            found[name.replace("_", "-")] = value
    return found


def _parse_box(spec: str):
    try:
        pairs = []
        for chunk in spec.split(";"):
            lo, hi = chunk.split(",")
            pairs.append((float(lo), float(hi)))
        return pairs
    except ValueError as exc:
        raise SchemaError(f"malformed --box specification {spec!r}: {exc}") from exc


def _parse_vector(spec: str, what: str):
    try:
        return np.array([float(v) for v in spec.split(",")], dtype=float)
    except ValueError as exc:
        raise SchemaError(f"malformed {what} {spec!r}: {exc}") from exc


def _load(problem_file: str, box: str | None):
    prob = load_problem(problem_file)
    if box is not None:
        from dataclasses import replace

        prob = replace(prob, box=tuple(_parse_box(box)))
    return prob


_POSITIVE = click.FloatRange(min=0, min_open=True)


def _solver_options(fn):
    fn = click.option("--starts", type=click.IntRange(min=1), default=512, show_default=True, help="Multistart count.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override the problem seed.")(fn)
    fn = click.option("--tol-feas", type=_POSITIVE, default=1e-9, show_default=True, help="Feasibility tolerance.")(fn)
    fn = click.option("--tol-kkt", type=_POSITIVE, default=1e-10, show_default=True, help="Stationarity tolerance.")(fn)
    fn = click.option("--box", type=str, default=None, help="Override the sampling box, e.g. '-2,2;-2,2;-2,2'.")(fn)
    return fn


def _output_options(fn):
    fn = click.option("--json", "as_json", is_flag=True, help="Emit structured JSON instead of text.")(fn)
    fn = click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write output to a file.")(fn)
    return fn


@click.group()
@click.version_option(package_name="optdesign")
def main():
    """Decide solvability of social choice problems over equality-constrained
    alternative sets by analyzing the objective constraint's optimality."""


@main.command()
@click.argument("problem_file", type=click.Path())
@_solver_options
@click.option("--tol-opt", type=_POSITIVE, default=1e-6, show_default=True, help="Optimality match tolerance.")
@_output_options
@click.pass_context
@_handled
def analyze(ctx, problem_file, starts, seed, tol_feas, tol_kkt, box, tol_opt, as_json, out):
    """Full pipeline: critical points, certification, verdict."""
    prob = _load(problem_file, box)
    provenance = _overrides(
        ctx, ["starts", "seed", "tol_feas", "tol_kkt", "tol_opt", "box"]
    )
    report = analyze_problem(
        prob,
        n_starts=starts,
        seed=seed,
        tol_feas=tol_feas,
        tol_kkt=tol_kkt,
        tol_opt=tol_opt,
        provenance=provenance,
    )
    _emit(report.to_json() if as_json else report.to_text(), out)
    if report.verdict is Verdict.INFEASIBLE:
        sys.exit(_EXIT_INFEASIBLE)


def _catalog_payload(catalog, provenance):
    return {
        "points": [
            {
                "p": [float(v) for v in pt.p],
                "multipliers": [float(v) for v in pt.multipliers],
                "value": float(pt.value),
                "kkt_residual": float(pt.kkt_residual),
                "hessian_det": float(pt.hessian_det),
                "nondegenerate": bool(pt.nondegenerate),
            }
            for pt in catalog.points
        ],
        "values": [float(v) for v in catalog.values],
        "u_min": catalog.u_min,
        "u_max": catalog.u_max,
        "starts_used": catalog.starts_used,
        "converged": catalog.converged,
        "is_morse": catalog.is_morse,
        "continuum_suspect": catalog.continuum_suspect,
        "warnings": list(catalog.warnings),
        "provenance": provenance,
    }


@main.command()
@click.argument("problem_file", type=click.Path())
@_solver_options
@_output_options
@click.pass_context
@_handled
def critical(ctx, problem_file, starts, seed, tol_feas, tol_kkt, box, as_json, out):
    """Enumerate and certify critical points; dump the catalog."""
    prob = _load(problem_file, box)
    provenance = _overrides(ctx, ["starts", "seed", "tol_feas", "tol_kkt", "box"])
    catalog = morse_certify(
        prob,
        solve_critical_points(
            prob, n_starts=starts, seed=seed, tol_kkt=tol_kkt, tol_feas=tol_feas
        ),
    )
    if not catalog.points:
        _fail(_EXIT_INFEASIBLE, "no critical points found")
    if as_json:
        text = json.dumps(_catalog_payload(catalog, provenance), indent=2, sort_keys=True) + "\n"
    else:
        lines = [
            f"{len(catalog.points)} critical point(s), "
            f"{catalog.converged}/{catalog.starts_used} starts converged",
            f"critical values: {', '.join(f'{v:g}' for v in catalog.values)}",
            f"u_min={catalog.u_min:g} u_max={catalog.u_max:g}",
            f"nondegeneracy certification: {'passed' if catalog.is_morse else 'FAILED'}",
        ]
        lines.extend(f"warning: {w}" for w in catalog.warnings)
        text = "\n".join(lines) + "\n"
    _emit(text, out)


@main.command("range")
@click.argument("problem_file", type=click.Path())
@_solver_options
@_output_options
@click.pass_context
@_handled
def range_cmd(ctx, problem_file, starts, seed, tol_feas, tol_kkt, box, as_json, out):
    """Report only the objective's range over the feasible set."""
    prob = _load(problem_file, box)
    provenance = _overrides(ctx, ["starts", "seed", "tol_feas", "tol_kkt", "box"])
    catalog = solve_critical_points(
        prob, n_starts=starts, seed=seed, tol_kkt=tol_kkt, tol_feas=tol_feas
    )
    if not catalog.points:
        _fail(_EXIT_INFEASIBLE, "no critical points found")
    if as_json:
        payload = {"u_min": catalog.u_min, "u_max": catalog.u_max, "provenance": provenance}
        text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        text = f"u_min={catalog.u_min:g} u_max={catalog.u_max:g}\n"
    _emit(text, out)


@main.command()
@click.argument("problem_file", type=click.Path())
@click.option("--u", type=float, required=True, help="Target level of the objective.")
@click.option("--band", type=str, required=True, help="Invariant band 'A,B' around the target.")
@click.option("--start", "start_csv", type=str, required=True, help="Start point 'x1,...,xn'.")
@click.option("--dt", type=float, default=1e-2, show_default=True, help="Integration step size.")
@click.option("--tmax", type=float, default=50.0, show_default=True, help="Integration horizon.")
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="Write the CSV to a file.")
@_handled
def flow(problem_file, u, band, start_csv, dt, tmax, out):
    """Integrate the level-seeking flow from a start point; emit CSV samples."""
    prob = load_problem(problem_file)
    band_pair = _parse_vector(band, "--band")
    if band_pair.shape != (2,):
        raise SchemaError("--band expects exactly two values 'A,B'")
    start = _parse_vector(start_csv, "--start")
    if start.shape != (prob.n,):
        raise SchemaError(f"--start expects {prob.n} coordinates")
    try:
        cfg = FlowConfig(u=u, band=(band_pair[0], band_pair[1]), dt=dt, t_max=tmax)
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
    feasible = project_to_y(prob, start)
    trajectory = integrate_flow(prob, cfg, feasible.p)
    _emit(trajectory_to_csv(trajectory, prob.n), out)
    if trajectory.error is not None:
        _fail(_EXIT_NUMERICAL, trajectory.error)


@main.command()
@click.argument("problem_file", type=click.Path())
@click.option("--epsilon", type=float, required=True, help="Perturbation coefficient bound.")
@click.option("--tries", type=int, default=10, show_default=True, help="Maximum redraw attempts.")
@click.option("--starts", type=int, default=512, show_default=True, help="Multistart count per try.")
@click.option("--seed", type=int, default=None, help="Override the problem seed for the draws.")
@_output_options
@_handled
def perturb(problem_file, epsilon, tries, starts, seed, as_json, out):
    """Repair a degenerate objective by a random linear perturbation.

    Writes the perturbed problem (objective target set to the recomputed
    maximum) next to the input as '<stem>.perturbed.json' unless --out is
    given, and prints a repair report to standard output.
    """
    prob = load_problem(problem_file)
    result = morse_repair(prob, epsilon=epsilon, max_tries=tries, seed=seed, n_starts=starts)
    repaired = with_target(result.problem, result.catalog.u_max)
    out_path = out or str(Path(problem_file).with_suffix("")) + ".perturbed.json"
    save_problem(
        repaired,
        out_path,
        provenance={
            "perturbation": [float(v) for v in result.perturbation.a],
            "epsilon": epsilon,
            "seed": result.perturbation.seed,
            "tries_used": result.tries_used,
            "target": "max",
        },
    )
    payload = {
        "tries_used": result.tries_used,
        "perturbation": [float(v) for v in result.perturbation.a],
        "u_min": result.catalog.u_min,
        "u_max": result.catalog.u_max,
        "critical_points": len(result.catalog.points),
        "is_morse": result.catalog.is_morse,
        "perturbed_file": out_path,
    }
    if as_json:
        click.echo(json.dumps(payload, indent=2, sort_keys=True))
    else:
        click.echo(
            f"repaired in {result.tries_used} tr{'y' if result.tries_used == 1 else 'ies'}: "
            f"{payload['critical_points']} nondegenerate critical points, "
            f"u_min={payload['u_min']:g} u_max={payload['u_max']:g}"
        )
        click.echo(f"perturbed problem written to {out_path}")


@main.command()
@click.argument("report_file", type=click.Path())
@click.option("--choices", required=True, help="Agent choices 'x1,..,xn;x1,..,xn;...'.")
@click.option("--json", "as_json", is_flag=True, help="Emit structured JSON instead of text.")
@_handled
def scf(report_file, choices, as_json):
    """Aggregate agent choices using a prior SOLUTION_EXISTS analysis report."""
    try:
        with open(report_file, "r", encoding="utf-8") as fh:
            report = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read report file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"report file is not valid JSON: {exc}") from exc
    if report.get("verdict") != Verdict.SOLUTION_EXISTS.value or not report.get("X"):
        _fail(
            _EXIT_INFEASIBLE,
            "the analysis artifact does not certify a finite alternative set "
            "(a SOLUTION_EXISTS analyze run is required first)",
        )
    alternatives = FiniteAlternatives(
        points=tuple(np.asarray(p, dtype=float) for p in report["X"]),
        labels=tuple(int(v) for v in report["labels"]),
    )
    rule = build_scf(alternatives)
    profile = [
        _parse_vector(chunk, "--choices entry") for chunk in choices.split(";") if chunk.strip()
    ]
    if not profile:
        raise SchemaError("--choices must contain at least one point")
    winner = rule(*profile)
    label = rule.label_of(winner)
    if as_json:
        click.echo(json.dumps({"label": label, "point": [float(v) for v in winner]}, sort_keys=True))
    else:
        coords = ", ".join(f"{v:.10g}" for v in winner)
        click.echo(f"label {label}: ({coords})")


if __name__ == "__main__":
    main()
