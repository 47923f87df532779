"""Solvability verdicts for constraint problems.

The pipeline: enumerate critical points of the objective over the feasible
set, certify nondegeneracy, classify the objective target against the
computed range [u_min, u_max], and map the outcome to a verdict:

* the target misses the range entirely: the alternative set is empty
  (INFEASIBLE);
* the target is a regular interior value: the alternatives form a compact
  manifold without boundary, which admits no acceptable aggregation rule
  (PARADOX_REGULAR);
* the target is a critical interior value: still no acceptable rule exists
  (PARADOX_SUBOPTIMAL); optimality of the target is necessary;
* the target is optimal and every critical point is certified nondegenerate:
  the alternative set is finite and the highest-label rule settles the
  problem (SOLUTION_EXISTS);
* the target is optimal but certification failed: necessity holds yet
  sufficiency is not established, since degenerate optima can carry a
  continuum of alternatives, e.g. a circle, which admits no rule
  (NECESSARY_ONLY).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .critical import (
    CriticalCatalog,
    VALUE_RTOL,
    morse_certify,
    solve_critical_points,
)
from .errors import EmptyCatalogError
from .manifold import (
    RANK_RTOL,
    ConstraintProblem,
    jacobian_y_many,
    project_many,
    residual,
    sample_box,
)
from .scf import FiniteAlternatives

OPTIMALITY_RTOL = 1e-6
ALTERNATIVE_RESIDUAL_TOL = 1e-8

# Fraction of the box diagonal above which feasible-sample gaps suggest a
# disconnected feasible set (heuristic, reported as a caveat only).
_COMPONENT_GAP_FRACTION = 0.1


class Classification(Enum):
    BELOW_RANGE = "below_range"
    AT_MIN = "at_min"
    INTERIOR_REGULAR = "interior_regular"
    INTERIOR_CRITICAL = "interior_critical"
    AT_MAX = "at_max"
    ABOVE_RANGE = "above_range"


class Verdict(Enum):
    INFEASIBLE = "INFEASIBLE"
    PARADOX_REGULAR = "PARADOX_REGULAR"
    PARADOX_SUBOPTIMAL = "PARADOX_SUBOPTIMAL"
    NECESSARY_ONLY = "NECESSARY_ONLY"
    SOLUTION_EXISTS = "SOLUTION_EXISTS"


_STANDING_NOTES = (
    "the feasible set is assumed bounded (within the sampling box) and connected; "
    "with several components, the target would have to be the global optimum of the "
    "objective over at least one component",
    "critical-point enumeration is multistart-based; completeness of the catalog is "
    "heuristic and improves with more starts",
)


@dataclass(frozen=True)
class AnalysisReport:
    """Verdict plus the evidence that produced it."""

    verdict: Verdict
    classification: Classification | None
    c_m: float
    u_min: float | None
    u_max: float | None
    critical_values: tuple[float, ...]
    catalog: CriticalCatalog | None
    is_morse: bool | None
    continuum_suspect: bool
    alternatives: FiniteAlternatives | None
    warnings: tuple[str, ...]
    notes: tuple[str, ...]
    provenance: dict

    def to_dict(self) -> dict:
        points = []
        if self.catalog is not None:
            for pt in self.catalog.points:
                points.append(
                    {
                        "p": [float(v) for v in pt.p],
                        "multipliers": [float(v) for v in pt.multipliers],
                        "value": float(pt.value),
                        "kkt_residual": float(pt.kkt_residual),
                        "hessian_det": float(pt.hessian_det),
                        "nondegenerate": bool(pt.nondegenerate),
                    }
                )
        return {
            "verdict": self.verdict.value,
            "classification": None if self.classification is None else self.classification.value,
            "c_m": float(self.c_m),
            "u_min": None if self.u_min is None else float(self.u_min),
            "u_max": None if self.u_max is None else float(self.u_max),
            "critical_values": [float(v) for v in self.critical_values],
            "is_morse": self.is_morse,
            "continuum_suspect": bool(self.continuum_suspect),
            "points": points,
            "X": None
            if self.alternatives is None
            else [[float(v) for v in p] for p in self.alternatives.points],
            "labels": None if self.alternatives is None else list(self.alternatives.labels),
            "starts_used": 0 if self.catalog is None else self.catalog.starts_used,
            "converged": 0 if self.catalog is None else self.catalog.converged,
            "warnings": list(self.warnings),
            "notes": list(self.notes),
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"verdict: {self.verdict.value}"]
        lines.append(f"objective target c_m = {self.c_m:g}")
        if self.u_min is not None:
            lines.append(f"objective range over the feasible set: [{self.u_min:g}, {self.u_max:g}]")
            values = ", ".join(f"{v:g}" for v in self.critical_values)
            lines.append(f"critical values: {values}")
        if self.classification is not None:
            lines.append(f"classification of the target: {self.classification.value}")
        if self.is_morse is not None:
            state = "passed" if self.is_morse else "FAILED"
            lines.append(f"nondegeneracy certification: {state}")
        if self.continuum_suspect:
            lines.append("a continuum of critical points is suspected")
        lines.append(_VERDICT_EXPLANATIONS[self.verdict])
        if self.alternatives is not None and len(self.alternatives) > 0:
            lines.append(f"alternative set ({len(self.alternatives)} point(s)):")
            for label, p in zip(self.alternatives.labels, self.alternatives.points):
                coords = ", ".join(f"{v:.10g}" for v in p)
                lines.append(f"  label {label}: ({coords})")
        if self.warnings:
            lines.append("warnings:")
            lines.extend(f"  - {w}" for w in self.warnings)
        return "\n".join(lines) + "\n"


_VERDICT_EXPLANATIONS = {
    Verdict.INFEASIBLE: (
        "the alternative set is empty: the target level is not attained by the "
        "objective on the feasible set"
    ),
    Verdict.PARADOX_REGULAR: (
        "no acceptable aggregation rule exists: the target is a regular interior "
        "value, so the alternatives form a compact boundariless manifold"
    ),
    Verdict.PARADOX_SUBOPTIMAL: (
        "no acceptable aggregation rule exists: the target sits strictly inside the "
        "objective's range, violating the necessary optimality condition"
    ),
    Verdict.NECESSARY_ONLY: (
        "the necessary optimality condition holds, but nondegeneracy certification "
        "failed, so the alternative set could not be certified finite; degenerate "
        "optima can carry a continuum of alternatives (e.g. a circle), over which no "
        "acceptable aggregation rule exists, while a small generic perturbation of "
        "the objective restores solvability (see the perturbation command)"
    ),
    Verdict.SOLUTION_EXISTS: (
        "the target is optimal and every critical point is nondegenerate, so the "
        "alternative set is finite and the highest-label rule is an acceptable "
        "aggregation rule"
    ),
}


def classify_c(
    prob: ConstraintProblem,
    catalog: CriticalCatalog,
    tol_opt: float = OPTIMALITY_RTOL,
    value_rtol: float = VALUE_RTOL,
) -> Classification:
    """Place the objective target against the computed range and value set.

    Comparisons use relative bands tol * (1 + |value|).  Interior targets are
    critical when they match a catalog value, regular otherwise.
    """
    if not catalog.points:
        raise EmptyCatalogError("no critical points found; classification is impossible")
    if prob.objective_target is None:
        raise ValueError("the problem has no objective target to classify")
    c = prob.objective_target
    tol_min = tol_opt * (1.0 + abs(catalog.u_min))
    tol_max = tol_opt * (1.0 + abs(catalog.u_max))
    if c < catalog.u_min - tol_min:
        return Classification.BELOW_RANGE
    if c > catalog.u_max + tol_max:
        return Classification.ABOVE_RANGE
    if abs(c - catalog.u_min) <= tol_min:
        return Classification.AT_MIN
    if abs(c - catalog.u_max) <= tol_max:
        return Classification.AT_MAX
    for v in catalog.values:
        if abs(c - v) <= value_rtol * (1.0 + abs(v)):
            return Classification.INTERIOR_CRITICAL
    return Classification.INTERIOR_REGULAR


def _count_components(points: np.ndarray, gap: float) -> int:
    """Single-linkage component count of a point cloud at the given gap."""
    k = len(points)
    if k <= 1:
        return k
    dist = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    assigned = np.zeros(k, dtype=bool)
    components = 0
    for start in range(k):
        if assigned[start]:
            continue
        components += 1
        frontier = [start]
        assigned[start] = True
        while frontier:
            i = frontier.pop()
            for j in np.flatnonzero((dist[i] <= gap) & ~assigned):
                assigned[j] = True
                frontier.append(int(j))
    return components


def _cq_spot_check(prob, catalog, seed, cq_samples, tol_feas):
    """Constraint-qualification failures at catalog points and fresh samples."""
    coords = [pt.p for pt in catalog.points]
    rng = np.random.default_rng([seed, 1])
    extra, ok, _, _, _ = project_many(prob, sample_box(prob, cq_samples, rng), tol=tol_feas)
    cloud = np.array(coords + [p for p in extra[ok]])
    if len(cloud) == 0:
        return 0, 0, cloud
    jac = jacobian_y_many(prob, cloud, check=False)
    sigma = np.linalg.svd(jac, compute_uv=False)
    bad = ~((sigma[:, 0] > 0.0) & (sigma[:, -1] > RANK_RTOL * sigma[:, 0]))
    return int(np.sum(bad)), len(cloud), cloud


def _enumerate_alternatives(prob, catalog, classification, value_rtol, warnings):
    target_value = catalog.u_min if classification is Classification.AT_MIN else catalog.u_max
    members = [
        pt.p
        for pt in catalog.points
        if abs(pt.value - target_value) <= value_rtol * (1.0 + abs(target_value))
    ]
    alternatives = FiniteAlternatives.from_points(members)
    for p in alternatives.points:
        res = np.abs(residual(prob, p))
        obj_gap = abs(prob.objective.evaluate(p) - prob.objective_target)
        if res.max(initial=0.0) > ALTERNATIVE_RESIDUAL_TOL or obj_gap > max(
            ALTERNATIVE_RESIDUAL_TOL, OPTIMALITY_RTOL * (1.0 + abs(prob.objective_target))
        ):
            warnings.append(
                "an enumerated alternative violates a constraint beyond tolerance "
                f"(residual {max(res.max(initial=0.0), obj_gap):.3e})"
            )
    return alternatives


def analyze(
    prob: ConstraintProblem,
    n_starts: int = 512,
    seed: int | None = None,
    tol_feas: float = 1e-9,
    tol_kkt: float = 1e-10,
    tol_opt: float = OPTIMALITY_RTOL,
    cq_samples: int = 100,
    provenance: dict | None = None,
) -> AnalysisReport:
    """Full pipeline from problem to verdict.

    Raises EmptyCatalogError when the feasible set was reached but no
    critical point converged; returns an INFEASIBLE report when the feasible
    set is unreachable from the sampling box or the target misses the range.
    """
    if prob.objective_target is None:
        raise ValueError("the problem has no objective target to analyze")
    seed_eff = prob.seed if seed is None else seed
    prov = dict(provenance or {})
    prov.setdefault("n_starts", n_starts)
    prov.setdefault("seed", seed_eff)

    catalog = solve_critical_points(
        prob, n_starts=n_starts, seed=seed_eff, tol_kkt=tol_kkt, tol_feas=tol_feas
    )
    if not catalog.points:
        if catalog.projection_failures == catalog.starts_used:
            return AnalysisReport(
                verdict=Verdict.INFEASIBLE,
                classification=None,
                c_m=prob.objective_target,
                u_min=None,
                u_max=None,
                critical_values=(),
                catalog=catalog,
                is_morse=None,
                continuum_suspect=False,
                alternatives=None,
                warnings=catalog.warnings
                + ("the feasible set is unreachable within the sampling box",),
                notes=_STANDING_NOTES,
                provenance=prov,
            )
        raise EmptyCatalogError(
            "no critical points found although the feasible set is reachable; "
            "raise n_starts or loosen tolerances"
        )

    catalog = morse_certify(prob, catalog)
    warnings = list(catalog.warnings)

    bad_cq, checked, cloud = _cq_spot_check(prob, catalog, seed_eff, cq_samples, tol_feas)
    if bad_cq:
        warnings.append(
            f"constraint qualifications fail at {bad_cq} of {checked} checked feasible points"
        )

    classification = classify_c(prob, catalog, tol_opt=tol_opt)
    alternatives = None

    if classification in (Classification.BELOW_RANGE, Classification.ABOVE_RANGE):
        verdict = Verdict.INFEASIBLE
        alternatives = FiniteAlternatives.from_points([])
    elif classification in (Classification.AT_MIN, Classification.AT_MAX):
        if catalog.is_morse:
            verdict = Verdict.SOLUTION_EXISTS
            alternatives = _enumerate_alternatives(
                prob, catalog, classification, VALUE_RTOL, warnings
            )
        else:
            verdict = Verdict.NECESSARY_ONLY
    elif classification is Classification.INTERIOR_CRITICAL:
        verdict = Verdict.PARADOX_SUBOPTIMAL
        gap = _COMPONENT_GAP_FRACTION * float(
            np.linalg.norm([hi - lo for lo, hi in prob.box])
        )
        if _count_components(cloud, gap) > 1:
            warnings.append(
                "feasible samples split into far-apart clusters; if the feasible set "
                "is disconnected, the target may still be optimal on one component"
            )
    else:
        verdict = Verdict.PARADOX_REGULAR

    return AnalysisReport(
        verdict=verdict,
        classification=classification,
        c_m=prob.objective_target,
        u_min=catalog.u_min,
        u_max=catalog.u_max,
        critical_values=catalog.values,
        catalog=catalog,
        is_morse=catalog.is_morse,
        continuum_suspect=catalog.continuum_suspect,
        alternatives=alternatives,
        warnings=tuple(warnings),
        notes=_STANDING_NOTES,
        provenance=prov,
    )
