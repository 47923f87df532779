"""Finite alternative sets and the highest-label aggregation rule.

Over a finite set of alternatives, the rule that returns the input choice
carrying the highest label is anonymous, unanimous, and trivially continuous,
so it settles the aggregation problem whenever the alternative set is finite.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations, product

import numpy as np

from .errors import UnknownAlternativeError

SNAP_TOL = 1e-8

MAX_AUDIT_ALTERNATIVES = 8
MAX_AUDIT_AGENTS = 4


@dataclass(frozen=True)
class FiniteAlternatives:
    """Enumerated alternatives with labels 1..K in lexicographic point order."""

    points: tuple[np.ndarray, ...]
    labels: tuple[int, ...]

    @classmethod
    def from_points(cls, points) -> "FiniteAlternatives":
        pts = [np.asarray(p, dtype=float) for p in points]
        pts.sort(key=tuple)
        return cls(tuple(pts), tuple(range(1, len(pts) + 1)))

    def __len__(self) -> int:
        return len(self.points)


class HighestLabelRule:
    """Aggregation rule: return the submitted choice with the highest label.

    Inputs are matched to the labeled alternatives within a snap distance;
    anything farther is rejected.
    """

    def __init__(self, alternatives: FiniteAlternatives, snap_tol: float = SNAP_TOL):
        if len(alternatives) < 1:
            raise ValueError("the alternative set must contain at least one point")
        self.alternatives = alternatives
        self.snap_tol = snap_tol

    def label_of(self, choice) -> int:
        choice = np.asarray(choice, dtype=float)
        dists = [float(np.linalg.norm(choice - p)) for p in self.alternatives.points]
        best = int(np.argmin(dists))
        if dists[best] > self.snap_tol:
            raise UnknownAlternativeError(
                f"choice {choice.tolist()} matches no labeled alternative "
                f"(nearest is {dists[best]:.3e} away, snap tolerance {self.snap_tol:g})"
            )
        return self.alternatives.labels[best]

    def __call__(self, *choices) -> np.ndarray:
        if len(choices) == 1 and np.asarray(choices[0]).ndim == 2:
            choices = tuple(np.asarray(choices[0]))
        if not choices:
            raise ValueError("at least one choice is required")
        winner = max(self.label_of(c) for c in choices)
        return self.alternatives.points[self.alternatives.labels.index(winner)].copy()


def build_scf(alternatives: FiniteAlternatives, snap_tol: float = SNAP_TOL) -> HighestLabelRule:
    """The max-label social choice function over a finite alternative set."""
    return HighestLabelRule(alternatives, snap_tol)


@dataclass(frozen=True)
class AxiomCounts:
    agents: int
    unanimity_checks: int
    unanimity_failures: int
    anonymity_checks: int
    anonymity_failures: int


@dataclass(frozen=True)
class AxiomAudit:
    """Exhaustive unanimity/anonymity audit of an aggregation rule.

    Continuity needs no checking: on a finite discrete alternative set every
    map is continuous.
    """

    per_k: tuple[AxiomCounts, ...]
    continuity_note: str = "continuity is trivial on a finite discrete alternative set"

    @property
    def unanimity_checks(self) -> int:
        return sum(c.unanimity_checks for c in self.per_k)

    @property
    def unanimity_failures(self) -> int:
        return sum(c.unanimity_failures for c in self.per_k)

    @property
    def anonymity_checks(self) -> int:
        return sum(c.anonymity_checks for c in self.per_k)

    @property
    def anonymity_failures(self) -> int:
        return sum(c.anonymity_failures for c in self.per_k)

    @property
    def passed(self) -> bool:
        return self.unanimity_failures == 0 and self.anonymity_failures == 0


def _same_point(a, b, tol=1e-9) -> bool:
    return bool(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)) <= tol)


def audit_rule(rule, points, k_max: int = 3) -> AxiomAudit:
    """Exhaustively audit any aggregation rule over an explicit point set.

    For every number of agents up to ``k_max``: unanimity is checked on each
    alternative, anonymity on every tuple under every argument permutation
    (identity included).  Exhaustive enumeration bounds the problem size.
    """
    pts = [np.asarray(p, dtype=float) for p in points]
    if len(pts) > MAX_AUDIT_ALTERNATIVES:
        raise ValueError(
            f"exhaustive audit supports at most {MAX_AUDIT_ALTERNATIVES} alternatives, got {len(pts)}"
        )
    if not 1 <= k_max <= MAX_AUDIT_AGENTS:
        raise ValueError(f"exhaustive audit supports 1 <= k_max <= {MAX_AUDIT_AGENTS}, got {k_max}")

    per_k = []
    for k in range(1, k_max + 1):
        ucheck = ufail = acheck = afail = 0
        for p in pts:
            ucheck += 1
            if not _same_point(rule(*([p] * k)), p):
                ufail += 1
        for tup in product(pts, repeat=k):
            reference = rule(*tup)
            for perm in permutations(tup):
                acheck += 1
                if not _same_point(rule(*perm), reference):
                    afail += 1
        per_k.append(AxiomCounts(k, ucheck, ufail, acheck, afail))
    return AxiomAudit(tuple(per_k))


def scf_axiom_audit(alternatives: FiniteAlternatives, k_max: int = 3) -> AxiomAudit:
    """Audit the highest-label rule built from the alternative set."""
    return audit_rule(build_scf(alternatives), [p for p in alternatives.points], k_max)
