"""Constraint problems: residuals, Jacobians, rank checks, and projection.

A problem consists of equality constraints ``g_i(p) = c_i`` (i < m) that carve
the feasible set out of R^n, plus one objective constraint ``g_m(p) = c_m``
whose level is analyzed against the objective's range over the feasible set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .errors import ProjectionError, SchemaError
from .expressions import Expression, parse

DEFAULT_SEED = 42
DEFAULT_BOX_HALF_WIDTH = 10.0
FEASIBILITY_TOL = 1e-9
RANK_RTOL = 1e-8

# Relative floor below which a projection Jacobian is treated as rank
# deficient (breakdown), as opposed to the looser reporting threshold above.
_BREAKDOWN_RTOL = 1e-12


@dataclass(frozen=True)
class ConstraintProblem:
    """Immutable problem data; all operations on it are pure."""

    variables: tuple[str, ...]
    constraints: tuple[tuple[Expression, float], ...]
    objective: Expression
    objective_target: float | None
    box: tuple[tuple[float, float], ...]
    seed: int = DEFAULT_SEED

    def __post_init__(self):
        n = len(self.variables)
        m = len(self.constraints) + 1
        if m < 2:
            raise SchemaError("at least one constraint besides the objective is required")
        if m >= n:
            raise SchemaError(
                f"the number of constraints including the objective ({m}) must be "
                f"smaller than the number of variables ({n})"
            )
        for expr, _ in (*self.constraints, (self.objective, None)):
            if expr.variables != self.variables:
                raise SchemaError("expression variables do not match the problem variables")
        if len(self.box) != n:
            raise SchemaError(f"box must have one interval per variable ({n})")
        for lo, hi in self.box:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo <= hi):
                raise SchemaError(f"empty or non-finite box interval [{lo}, {hi}]")

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def m(self) -> int:
        return len(self.constraints) + 1


@dataclass(frozen=True)
class FeasiblePoint:
    p: np.ndarray
    residual_norm: float
    iterations: int


@dataclass(frozen=True)
class RankReport:
    """Singular values of the constraint Jacobian and the full-rank verdict."""

    singular_values: tuple[float, ...]
    full_rank: bool


def problem_from_strings(
    variables,
    constraints,
    objective,
    objective_target,
    box=None,
    seed=DEFAULT_SEED,
) -> ConstraintProblem:
    """Build a problem from expression source strings.

    ``constraints`` is a sequence of (source, level) pairs and ``objective``
    a single source string.  The sampling box defaults to [-10, 10]^n.
    """
    names = tuple(variables)
    if box is None:
        box = tuple((-DEFAULT_BOX_HALF_WIDTH, DEFAULT_BOX_HALF_WIDTH) for _ in names)
    return ConstraintProblem(
        variables=names,
        constraints=tuple((parse(src, names), float(c)) for src, c in constraints),
        objective=parse(objective, names),
        objective_target=None if objective_target is None else float(objective_target),
        box=tuple((float(lo), float(hi)) for lo, hi in box),
        seed=int(seed),
    )


def problem_from_dict(data: dict) -> ConstraintProblem:
    """Decode the documented problem-file schema (see README)."""
    if not isinstance(data, dict):
        raise SchemaError("problem file must contain a JSON object")
    try:
        variables = data["variables"]
        constraints = [(c["g"], c["c"]) for c in data["constraints"]]
        objective = data["objective"]["g"]
        target = data["objective"].get("c")
        box = data.get("box")
        seed = data.get("seed", DEFAULT_SEED)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed problem file: missing or invalid field {exc}") from exc
    if not isinstance(variables, list) or not all(isinstance(v, str) for v in variables):
        raise SchemaError("'variables' must be an array of names")
    if box is not None:
        try:
            box = [(float(lo), float(hi)) for lo, hi in box]
        except (TypeError, ValueError) as exc:
            raise SchemaError("'box' must be an array of [lo, hi] pairs") from exc
    try:
        return problem_from_strings(variables, constraints, objective, target, box, seed)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"malformed problem file: {exc}") from exc


def problem_to_dict(prob: ConstraintProblem, provenance: dict | None = None) -> dict:
    data = {
        "variables": list(prob.variables),
        "constraints": [{"g": str(expr), "c": c} for expr, c in prob.constraints],
        "objective": {"g": str(prob.objective), "c": prob.objective_target},
        "box": [[lo, hi] for lo, hi in prob.box],
        "seed": prob.seed,
    }
    if provenance is not None:
        data["provenance"] = provenance
    return data


def load_problem(path) -> ConstraintProblem:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read problem file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"problem file is not valid JSON: {exc}") from exc
    return problem_from_dict(data)


def save_problem(prob: ConstraintProblem, path, provenance: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(problem_to_dict(prob, provenance), fh, indent=2, sort_keys=True)
        fh.write("\n")


def with_target(prob: ConstraintProblem, target: float) -> ConstraintProblem:
    return replace(prob, objective_target=float(target))


# ---------------------------------------------------------------------------
# Residuals and Jacobians


def residual_many(prob: ConstraintProblem, points: np.ndarray, check: bool = True) -> np.ndarray:
    """Constraint residuals g_i(p) - c_i, shape (K, m-1)."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty((points.shape[0], len(prob.constraints)))
    for i, (expr, c) in enumerate(prob.constraints):
        v, _, _ = expr.forward(points, order=0, check=check)
        out[:, i] = v - c
    return out


def residual(prob: ConstraintProblem, p) -> np.ndarray:
    """Constraint residuals at a single point, shape (m-1,)."""
    return residual_many(prob, np.asarray(p, dtype=float)[None, :])[0]


def _residual_and_jacobian(prob, points, check=True):
    points = np.atleast_2d(np.asarray(points, dtype=float))
    k, n = points.shape
    m1 = len(prob.constraints)
    res = np.empty((k, m1))
    jac = np.empty((k, m1, n))
    for i, (expr, c) in enumerate(prob.constraints):
        v, g, _ = expr.forward(points, order=1, check=check)
        res[:, i] = v - c
        jac[:, i, :] = g
    return res, jac


def jacobian_y_many(prob: ConstraintProblem, points: np.ndarray, check: bool = True) -> np.ndarray:
    """Stacked constraint gradients, shape (K, m-1, n)."""
    return _residual_and_jacobian(prob, points, check)[1]


def jacobian_y(prob: ConstraintProblem, p) -> np.ndarray:
    """Constraint Jacobian at a single point: row i is the gradient of g_i."""
    return jacobian_y_many(prob, np.asarray(p, dtype=float)[None, :])[0]


def check_cq(
    prob: ConstraintProblem,
    p,
    feas_tol: float = 1e-6,
    rank_rtol: float = RANK_RTOL,
) -> RankReport:
    """Constraint-qualification check at an approximately feasible point.

    Full rank means the smallest singular value of the constraint Jacobian
    exceeds ``rank_rtol`` times the largest.
    """
    p = np.asarray(p, dtype=float)
    res_norm = float(np.linalg.norm(residual(prob, p)))
    if res_norm > feas_tol:
        raise ValueError(
            f"constraint-qualification check requires a feasible point "
            f"(residual norm {res_norm:.3e} > {feas_tol:.0e})"
        )
    sigma = np.linalg.svd(jacobian_y(prob, p), compute_uv=False)
    full_rank = bool(sigma[0] > 0.0 and sigma[-1] > rank_rtol * sigma[0])
    return RankReport(tuple(float(s) for s in sigma), full_rank)


# ---------------------------------------------------------------------------
# Gauss-Newton projection onto the feasible set


def project_many(
    prob: ConstraintProblem,
    starts: np.ndarray,
    tol: float = FEASIBILITY_TOL,
    max_iter: int = 50,
):
    """Project a batch of points onto the feasible set.

    Returns (points, ok, residual_norms, rank_deficient, iterations); failed
    rows keep their last iterate.  Vectorized so multistart stays cheap.
    """
    pts = np.array(np.atleast_2d(np.asarray(starts, dtype=float)), copy=True)
    k = pts.shape[0]
    ok = np.zeros(k, dtype=bool)
    rank_deficient = np.zeros(k, dtype=bool)
    res_norms = np.full(k, np.inf)
    iterations = np.zeros(k, dtype=int)
    active = np.ones(k, dtype=bool)

    for it in range(max_iter + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        res, jac = _residual_and_jacobian(prob, pts[idx], check=False)
        norms = np.linalg.norm(res, axis=1)
        finite = np.isfinite(norms) & np.all(np.isfinite(jac), axis=(1, 2))
        res_norms[idx] = np.where(finite, norms, np.inf)
        iterations[idx] = it

        done = finite & (norms <= tol)
        ok[idx[done]] = True
        active[idx[done]] = False
        active[idx[~finite]] = False
        if it == max_iter:
            break

        cont = finite & ~done
        rows = idx[cont]
        if rows.size == 0:
            continue
        u, s, vt = np.linalg.svd(jac[cont], full_matrices=False)
        bad = (s[:, 0] <= 0.0) | (s[:, -1] <= _BREAKDOWN_RTOL * s[:, 0])
        rank_deficient[rows[bad]] = True
        active[rows[bad]] = False
        good = ~bad
        if np.any(good):
            # Gauss-Newton step p -= J^T (J J^T)^-1 r, applied via the SVD.
            coeff = (u[good].transpose(0, 2, 1) @ res[cont][good][:, :, None])[..., 0] / s[good]
            step = (vt[good].transpose(0, 2, 1) @ coeff[..., None])[..., 0]
            pts[rows[good]] -= step

    return pts, ok, res_norms, rank_deficient, iterations


def project_to_y(
    prob: ConstraintProblem,
    p0,
    tol: float = FEASIBILITY_TOL,
    max_iter: int = 50,
) -> FeasiblePoint:
    """Gauss-Newton projection of a single point onto the feasible set."""
    p0 = np.asarray(p0, dtype=float)
    pts, ok, res, rank_deficient, iters = project_many(prob, p0[None, :], tol, max_iter)
    if not ok[0]:
        if rank_deficient[0]:
            raise ProjectionError(
                "projection hit a rank-deficient constraint Jacobian",
                residual_norm=float(res[0]),
                rank_deficient=True,
            )
        raise ProjectionError(
            f"projection did not converge within {max_iter} iterations "
            f"(last residual norm {res[0]:.3e})",
            residual_norm=float(res[0]),
        )
    return FeasiblePoint(pts[0], float(res[0]), int(iters[0]))


def sample_box(prob: ConstraintProblem, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform samples from the problem box, shape (count, n)."""
    lo = np.array([b[0] for b in prob.box])
    hi = np.array([b[1] for b in prob.box])
    return lo + (hi - lo) * rng.random((count, prob.n))
