"""Linear objective perturbations that remove degenerate critical points.

Subtracting a random linear form a . p from the objective almost surely turns
the restricted objective into a function whose critical points are all
nondegenerate: the coefficient vectors for which degeneracy survives form a
Lebesgue-null set.  Uniform redraws therefore succeed with probability one,
and a retry loop covers numerical edge cases.  The perturbed objective stays
within epsilon * sum_i |p_i| of the original on the sampling box.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .critical import CriticalCatalog, morse_certify, solve_critical_points
from .errors import MorseRepairError
from .expressions import Expression, Mul, Num, Sub, Var
from .manifold import ConstraintProblem


@dataclass(frozen=True)
class Perturbation:
    """Linear coefficients drawn from [-epsilon, epsilon]^n."""

    a: np.ndarray
    epsilon: float
    seed: int

    def __post_init__(self):
        if np.max(np.abs(self.a), initial=0.0) > self.epsilon:
            raise ValueError("perturbation coefficients exceed the stated epsilon bound")


@dataclass(frozen=True)
class RepairResult:
    problem: ConstraintProblem
    catalog: CriticalCatalog
    tries_used: int
    perturbation: Perturbation


def linear_perturb(prob: ConstraintProblem, a) -> ConstraintProblem:
    """Subtract the linear form a . p from the objective, at the syntax level.

    Zero coefficients contribute no term; an all-zero vector returns the
    objective unchanged.  The objective target is cleared: after perturbing,
    the caller re-derives it from the new range (maximum or minimum).
    """
    a = np.asarray(a, dtype=float)
    if a.shape != (prob.n,):
        raise ValueError(f"expected {prob.n} coefficients, got shape {a.shape}")
    root = prob.objective.root
    for i, coeff in enumerate(a):
        if coeff != 0.0:
            root = Sub(root, Mul(Num(float(coeff)), Var(i, prob.variables[i])))
    objective = (
        prob.objective if root is prob.objective.root else Expression(root, prob.variables)
    )
    return replace(prob, objective=objective, objective_target=None)


def morse_repair(
    prob: ConstraintProblem,
    epsilon: float,
    max_tries: int = 10,
    seed: int | None = None,
    n_starts: int = 512,
) -> RepairResult:
    """Redraw linear perturbations until the critical catalog certifies Morse.

    Coefficients come from a deterministic uniform stream on
    [-epsilon, epsilon]^n.  Each try re-runs the critical-point search on the
    perturbed problem; the first catalog with every point nondegenerate wins.
    Failure of all tries signals either extreme degeneracy or an undersampled
    multistart, and carries per-try diagnostics.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    if max_tries < 1:
        raise ValueError("max_tries must be at least 1")
    seed_eff = prob.seed if seed is None else seed
    rng = np.random.default_rng([seed_eff, 2])

    diagnostics = []
    for attempt in range(1, max_tries + 1):
        a = rng.uniform(-epsilon, epsilon, size=prob.n)
        perturbed = linear_perturb(prob, a)
        catalog = morse_certify(perturbed, solve_critical_points(perturbed, n_starts=n_starts))
        if catalog.points and catalog.is_morse:
            return RepairResult(
                problem=perturbed,
                catalog=catalog,
                tries_used=attempt,
                perturbation=Perturbation(a=a, epsilon=epsilon, seed=seed_eff),
            )
        diagnostics.append(
            {
                "try": attempt,
                "a": [float(v) for v in a],
                "points": len(catalog.points),
                "degenerate": sum(1 for pt in catalog.points if not pt.nondegenerate),
                "continuum_suspect": catalog.continuum_suspect,
            }
        )
    raise MorseRepairError(
        f"no perturbation out of {max_tries} tries produced a nondegenerate catalog; "
        "the problem may be extremely degenerate or the multistart undersampled",
        diagnostics,
    )
