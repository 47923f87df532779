"""Critical points of the objective restricted to the feasible set.

A point is critical when the objective gradient is a linear combination of
the constraint gradients.  The solver runs damped Newton iterations on the
stationarity-plus-feasibility system from many deterministic random starts,
deduplicates the survivors, clusters their objective values, and certifies
nondegeneracy through the full Hessian of the Lagrangian
``L(lambda, p) = g_m(p) - sum_i lambda_i (g_i(p) - c_i)``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .manifold import ConstraintProblem, jacobian_y_many, project_many, sample_box

KKT_TOL = 1e-10
DEDUP_TOL = 1e-6
VALUE_RTOL = 1e-6
NONDEGENERACY_RTOL = 1e-8

# Two deduplicated points closer than this suggest a non-isolated critical set.
ISOLATION_TOL = 1e-4

# Neighbor radius and count for the non-isolation (continuum) heuristic.
CONTINUUM_NEIGHBOR_TOL = 1e-2
CONTINUUM_MIN_POINTS = 10

_MAX_NEWTON_ITER = 100
_MAX_BACKTRACKS = 30


@dataclass(frozen=True)
class LagrangianPoint:
    """A converged critical point with its multipliers and certification data."""

    p: np.ndarray
    multipliers: np.ndarray
    value: float
    kkt_residual: float
    hessian_det: float
    nondegenerate: bool


@dataclass(frozen=True)
class CriticalCatalog:
    """Deduplicated critical points and their clustered values (ascending)."""

    points: tuple[LagrangianPoint, ...]
    values: tuple[float, ...]
    u_min: float | None
    u_max: float | None
    starts_used: int
    converged: int
    projection_failures: int
    rank_deficient_starts: int
    is_morse: bool | None = None
    continuum_suspect: bool = False
    warnings: tuple[str, ...] = ()


def kkt_residual(prob: ConstraintProblem, p, multipliers) -> np.ndarray:
    """Stationarity and feasibility residual, shape (n + m - 1,).

    The first n entries are the gradient of the Lagrangian in p, the rest are
    the constraint residuals.
    """
    p = np.asarray(p, dtype=float)
    lam = np.asarray(multipliers, dtype=float)
    f, _ = _kkt_system(prob, p[None, :], lam[None, :], order=1)
    return f[0]


def _kkt_system(prob, points, multipliers, order):
    """Batched KKT residual F (K, d) and, for order 2, its Jacobian (K, d, d)."""
    k, n = points.shape
    m1 = multipliers.shape[1]
    vo, go, ho = prob.objective.forward(points, order=order, check=False)
    stat = go.copy()
    feas = np.empty((k, m1))
    jac_rows = np.empty((k, m1, n))
    hl = ho.copy() if order >= 2 else None
    for i, (expr, c) in enumerate(prob.constraints):
        vi, gi, hi = expr.forward(points, order=order, check=False)
        feas[:, i] = vi - c
        jac_rows[:, i, :] = gi
        stat -= multipliers[:, i, None] * gi
        if order >= 2:
            hl -= multipliers[:, i, None, None] * hi
    f = np.concatenate([stat, feas], axis=1)
    if order < 2:
        return f, jac_rows
    d = n + m1
    jf = np.zeros((k, d, d))
    jf[:, :n, :n] = hl
    jf[:, :n, n:] = -jac_rows.transpose(0, 2, 1)
    jf[:, n:, :n] = jac_rows
    return f, jf


def _lagrangian_hessian_blocks(prob, points, multipliers):
    """Constraint Jacobian (K, m-1, n) and Lagrangian pp-block (K, n, n)."""
    k, n = points.shape
    m1 = multipliers.shape[1]
    _, _, ho = prob.objective.forward(points, order=2, check=False)
    hl = ho.copy()
    jac = np.empty((k, m1, n))
    for i, (expr, _) in enumerate(prob.constraints):
        _, gi, hi = expr.forward(points, order=2, check=False)
        jac[:, i, :] = gi
        hl -= multipliers[:, i, None, None] * hi
    return jac, hl


def _bordered_many(prob, points, multipliers):
    """Full Hessians of the Lagrangian in (lambda, p) order, shape (K, d, d)."""
    k, n = points.shape
    m1 = multipliers.shape[1]
    jac, hl = _lagrangian_hessian_blocks(prob, points, multipliers)
    d = n + m1
    out = np.zeros((k, d, d))
    out[:, :m1, m1:] = -jac
    out[:, m1:, :m1] = -jac.transpose(0, 2, 1)
    out[:, m1:, m1:] = hl
    return out


def bordered_hessian(prob: ConstraintProblem, point: LagrangianPoint) -> np.ndarray:
    """Symmetric second-derivative matrix of the Lagrangian in (lambda, p).

    The lambda-lambda block is zero, the mixed blocks hold the negated
    constraint gradients, and the p-p block is the Hessian of the objective
    minus the multiplier-weighted constraint Hessians.
    """
    return _bordered_many(prob, point.p[None, :], point.multipliers[None, :])[0]


def _initial_multipliers(jac, grad_obj):
    """Least-squares fit of the objective gradient in the constraint gradients."""
    pinv = np.linalg.pinv(jac.transpose(0, 2, 1))
    return (pinv @ grad_obj[:, :, None])[..., 0]


def _newton_on_kkt(prob, points, multipliers, tol, max_iter):
    """Damped Newton with Armijo backtracking on the squared KKT residual.

    The step solves the linearized system through a pseudo-inverse, which
    degrades gracefully when critical points are non-isolated and the system
    Jacobian turns singular.  Rows iterate independently; the result for each
    start does not depend on which other starts are present.
    """
    k, n = points.shape
    pts = points.copy()
    lam = multipliers.copy()
    active = np.ones(k, dtype=bool)
    res_norm = np.full(k, np.inf)

    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        f, jf = _kkt_system(prob, pts[idx], lam[idx], order=2)
        sq = np.einsum("kd,kd->k", f, f)
        finite = np.isfinite(sq) & np.all(np.isfinite(jf), axis=(1, 2))
        res_norm[idx] = np.where(finite, np.sqrt(sq), np.inf)
        done = finite & (res_norm[idx] <= tol)
        active[idx[done]] = False
        active[idx[~finite]] = False
        cont = finite & ~done
        rows = idx[cont]
        if rows.size == 0:
            continue

        step = -(np.linalg.pinv(jf[cont]) @ f[cont][:, :, None])[..., 0]
        base_sq = sq[cont]
        t = np.ones(rows.size)
        accepted = np.zeros(rows.size, dtype=bool)
        new_p = np.empty((rows.size, n))
        new_l = np.empty((rows.size, lam.shape[1]))
        for _ in range(_MAX_BACKTRACKS):
            trying = ~accepted
            if not np.any(trying):
                break
            cand_p = pts[rows[trying]] + t[trying, None] * step[trying, :n]
            cand_l = lam[rows[trying]] + t[trying, None] * step[trying, n:]
            fc, _ = _kkt_system(prob, cand_p, cand_l, order=1)
            cand_sq = np.einsum("kd,kd->k", fc, fc)
            good = np.isfinite(cand_sq) & (cand_sq <= (1.0 - 1e-4 * t[trying]) * base_sq[trying])
            tr = np.flatnonzero(trying)
            new_p[tr[good]] = cand_p[good]
            new_l[tr[good]] = cand_l[good]
            accepted[tr[good]] = True
            t[tr[~good]] *= 0.5
        pts[rows[accepted]] = new_p[accepted]
        lam[rows[accepted]] = new_l[accepted]
        # Starts with no acceptable step have stalled; they stay at their
        # current iterate and are retired below the tolerance or discarded.
        active[rows[~accepted]] = False

    f, _ = _kkt_system(prob, pts, lam, order=1)
    with np.errstate(invalid="ignore"):
        final = np.linalg.norm(f, axis=1)
    final = np.where(np.isfinite(final), final, np.inf)
    return pts, lam, final


def _cluster_values(values, rtol):
    """Ascending representative values, merging gaps below rtol * (1 + |v|)."""
    clusters = []
    members = []
    for v in sorted(values):
        if members and abs(v - members[-1]) <= rtol * (1.0 + abs(v)):
            members.append(v)
        else:
            if members:
                clusters.append(sum(members) / len(members))
            members = [v]
    if members:
        clusters.append(sum(members) / len(members))
    return clusters


def solve_critical_points(
    prob: ConstraintProblem,
    n_starts: int = 512,
    seed: int | None = None,
    tol_kkt: float = KKT_TOL,
    tol_feas: float = 1e-9,
    dedup_tol: float = DEDUP_TOL,
    value_rtol: float = VALUE_RTOL,
    max_iter: int = _MAX_NEWTON_ITER,
) -> CriticalCatalog:
    """Multistart search for the critical points of the restricted objective.

    Starts are drawn uniformly from the problem box out of a deterministic
    stream, projected onto the feasible set, and polished by damped Newton on
    the stationarity system.  The result depends only on (problem, n_starts,
    seed); extending the number of starts keeps the earlier start points.
    """
    if n_starts < 1:
        raise ValueError("n_starts must be at least 1")
    if seed is None:
        seed = prob.seed
    rng = np.random.default_rng(seed)
    starts = sample_box(prob, n_starts, rng)

    proj, ok, _, rank_deficient, _ = project_many(prob, starts, tol=tol_feas)
    warnings = []
    n_rank_deficient = int(np.sum(rank_deficient))
    if n_rank_deficient > 0.9 * n_starts:
        warnings.append(
            "projection hit rank-deficient constraint Jacobians on more than 90% of "
            "starts; the constraint qualifications may fail on the feasible set"
        )
    if not np.any(ok):
        return CriticalCatalog(
            points=(),
            values=(),
            u_min=None,
            u_max=None,
            starts_used=n_starts,
            converged=0,
            projection_failures=int(np.sum(~ok)),
            rank_deficient_starts=n_rank_deficient,
            warnings=tuple(warnings),
        )

    pts0 = proj[ok]
    grad_obj = prob.objective.forward(pts0, order=1, check=False)[1]
    lam0 = _initial_multipliers(jacobian_y_many(prob, pts0, check=False), grad_obj)

    sol_p, sol_l, final = _newton_on_kkt(prob, pts0, lam0, tol_kkt, max_iter)
    keep = final <= tol_kkt
    converged = int(np.sum(keep))

    if converged == 0:
        return CriticalCatalog(
            points=(),
            values=(),
            u_min=None,
            u_max=None,
            starts_used=n_starts,
            converged=0,
            projection_failures=int(np.sum(~ok)),
            rank_deficient_starts=n_rank_deficient,
            warnings=tuple(warnings),
        )

    sol_p, sol_l, final = sol_p[keep], sol_l[keep], final[keep]
    values = prob.objective.forward(sol_p, order=0, check=False)[0]

    # Canonical order, then greedy dedup: first survivor of each ball wins.
    order = sorted(range(len(values)), key=lambda i: (values[i], tuple(sol_p[i])))
    kept: list[int] = []
    for i in order:
        if all(np.linalg.norm(sol_p[i] - sol_p[j]) > dedup_tol for j in kept):
            kept.append(i)

    dedup_p = sol_p[kept]
    dedup_l = sol_l[kept]
    bordered = _bordered_many(prob, dedup_p, dedup_l)
    dets = np.linalg.det(bordered)
    sigma = np.linalg.svd(bordered, compute_uv=False)
    nondegenerate = (sigma[:, 0] > 0.0) & (sigma[:, -1] > NONDEGENERACY_RTOL * sigma[:, 0])

    points = tuple(
        LagrangianPoint(
            p=dedup_p[j].copy(),
            multipliers=dedup_l[j].copy(),
            value=float(values[kept[j]]),
            kkt_residual=float(final[kept[j]]),
            hessian_det=float(dets[j]),
            nondegenerate=bool(nondegenerate[j]),
        )
        for j in range(len(kept))
    )
    clustered = _cluster_values([pt.value for pt in points], value_rtol)

    return CriticalCatalog(
        points=points,
        values=tuple(clustered),
        u_min=clustered[0],
        u_max=clustered[-1],
        starts_used=n_starts,
        converged=converged,
        projection_failures=int(np.sum(~ok)),
        rank_deficient_starts=n_rank_deficient,
        warnings=tuple(warnings),
    )


def _value_cluster_index(catalog: CriticalCatalog, value: float, rtol: float) -> int | None:
    for i, v in enumerate(catalog.values):
        if abs(value - v) <= rtol * (1.0 + abs(v)):
            return i
    return None


def morse_certify(
    prob: ConstraintProblem,
    catalog: CriticalCatalog,
    value_rtol: float = VALUE_RTOL,
) -> CriticalCatalog:
    """Attach the Morse verdict and the non-isolation heuristic to a catalog.

    The catalog passes when every point's Lagrangian Hessian is nonsingular
    (smallest singular value above the relative threshold) and no two
    deduplicated points lie suspiciously close together.  Separately, a value
    cluster collecting many mutually close points is flagged as a suspected
    continuum of critical points; the flag can only lower confidence in a
    positive certificate, never raise it.
    """
    warnings = list(catalog.warnings)
    pts = catalog.points
    is_morse = all(pt.nondegenerate for pt in pts)
    degenerate = sum(1 for pt in pts if not pt.nondegenerate)
    if degenerate:
        warnings.append(
            f"{degenerate} of {len(pts)} critical points have a singular Lagrangian Hessian"
        )

    coords = np.array([pt.p for pt in pts]) if pts else np.empty((0, prob.n))
    too_close = False
    if len(pts) >= 2:
        diff = coords[:, None, :] - coords[None, :, :]
        dist = np.linalg.norm(diff, axis=2)
        np.fill_diagonal(dist, np.inf)
        too_close = bool(np.min(dist) < ISOLATION_TOL)
        if too_close:
            warnings.append(
                "distinct converged critical points lie closer than "
                f"{ISOLATION_TOL:g}; they may not be isolated"
            )
            is_morse = False

        suspect_values = []
        for i, v in enumerate(catalog.values):
            members = [
                j
                for j, pt in enumerate(pts)
                if abs(pt.value - v) <= value_rtol * (1.0 + abs(v))
            ]
            if len(members) < CONTINUUM_MIN_POINTS:
                continue
            sub = dist[np.ix_(members, members)]
            crowded = int(np.sum(np.min(sub, axis=1) <= CONTINUUM_NEIGHBOR_TOL))
            if crowded >= CONTINUUM_MIN_POINTS:
                suspect_values.append(v)
        if suspect_values:
            formatted = ", ".join(f"{v:g}" for v in suspect_values)
            warnings.append(
                f"continuum-suspect critical value(s) {formatted}: many distinct "
                "converged points crowd the same level, suggesting a non-isolated "
                "critical set"
            )
            return replace(
                catalog,
                is_morse=is_morse,
                continuum_suspect=True,
                warnings=tuple(warnings),
            )

    return replace(catalog, is_morse=is_morse, continuum_suspect=False, warnings=tuple(warnings))
