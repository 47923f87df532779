"""Estimator-style wrappers around the analysis pipeline.

These classes follow the scikit-learn parameter conventions (keyword-only
constructor parameters mirrored as attributes, ``get_params``/``set_params``,
fitted attributes with trailing underscores) so the algorithms compose with
that ecosystem's tooling.  ``fit`` consumes a ConstraintProblem (or a problem
file path) rather than a sample matrix, so the transformer/predictor mixins
are deliberately not inherited; ``transform`` and ``predict`` operate on
arrays of points in the problem's ambient space.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .analysis import Verdict, analyze
from .critical import morse_certify, solve_critical_points
from .flow import FlowConfig, retract_to_level
from .manifold import ConstraintProblem, load_problem, project_to_y
from .scf import build_scf


def _as_problem(problem) -> ConstraintProblem:
    if isinstance(problem, ConstraintProblem):
        return problem
    return load_problem(problem)


def _check_points(estimator, X) -> np.ndarray:
    if not hasattr(estimator, "problem_"):
        raise NotFittedError(
            f"this {type(estimator).__name__} instance is not fitted yet; call fit first"
        )
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    n = estimator.problem_.n
    if X.shape[1] != n:
        raise ValueError(f"expected points with {n} coordinates, got {X.shape[1]}")
    return X


class ManifoldProjector(BaseEstimator):
    """Projects ambient points onto the feasible set of a constraint problem.

    Parameters
    ----------
    tol : float, target residual norm for the Gauss-Newton projection.
    max_iter : int, projection iteration budget per point.

    Attributes
    ----------
    problem_ : the fitted ConstraintProblem.
    """

    def __init__(self, tol=1e-9, max_iter=50):
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, problem, y=None):
        self.problem_ = _as_problem(problem)
        return self

    def transform(self, X) -> np.ndarray:
        X = _check_points(self, X)
        out = np.empty_like(X)
        for i, row in enumerate(X):
            out[i] = project_to_y(self.problem_, row, tol=self.tol, max_iter=self.max_iter).p
        return out


class LevelSetRetractor(BaseEstimator):
    """Retracts feasible points onto a narrow band around a target level.

    Parameters mirror the flow configuration: target level ``u``, invariant
    band ``(band_lo, band_hi)``, step size ``dt``, horizon ``t_max`` and the
    relative sub-band width ``band_tol``.
    """

    def __init__(self, u=0.0, band=(-1.0, 1.0), dt=1e-2, t_max=50.0, band_tol=1e-6):
        self.u = u
        self.band = band
        self.dt = dt
        self.t_max = t_max
        self.band_tol = band_tol

    def fit(self, problem, y=None):
        self.problem_ = _as_problem(problem)
        self.config_ = FlowConfig(
            u=self.u, band=tuple(self.band), dt=self.dt, t_max=self.t_max, band_tol=self.band_tol
        )
        return self

    def transform(self, X) -> np.ndarray:
        X = _check_points(self, X)
        out = np.empty_like(X)
        for i, row in enumerate(X):
            out[i] = retract_to_level(self.problem_, self.config_, row).p
        return out


class CriticalPointFinder(BaseEstimator):
    """Enumerates and certifies the critical points of the restricted objective.

    Attributes after fit: ``catalog_``, ``values_``, ``u_min_``, ``u_max_``,
    ``is_morse_``.
    """

    def __init__(self, n_starts=512, seed=None, tol_kkt=1e-10, tol_feas=1e-9):
        self.n_starts = n_starts
        self.seed = seed
        self.tol_kkt = tol_kkt
        self.tol_feas = tol_feas

    def fit(self, problem, y=None):
        self.problem_ = _as_problem(problem)
        catalog = solve_critical_points(
            self.problem_,
            n_starts=self.n_starts,
            seed=self.seed,
            tol_kkt=self.tol_kkt,
            tol_feas=self.tol_feas,
        )
        self.catalog_ = morse_certify(self.problem_, catalog)
        self.values_ = self.catalog_.values
        self.u_min_ = self.catalog_.u_min
        self.u_max_ = self.catalog_.u_max
        self.is_morse_ = self.catalog_.is_morse
        return self


class SolvabilityAnalyzer(BaseEstimator):
    """Runs the full verdict pipeline; predicts aggregated choices when solvable.

    After ``fit``: ``report_`` (full evidence), ``verdict_``, ``catalog_``,
    ``alternatives_`` and, for a SOLUTION_EXISTS verdict, ``rule_`` holding the
    highest-label aggregation rule.  ``predict`` treats the rows of X as the
    choices of k agents and returns the aggregated choice.
    """

    def __init__(self, n_starts=512, seed=None, tol_feas=1e-9, tol_kkt=1e-10, tol_opt=1e-6):
        self.n_starts = n_starts
        self.seed = seed
        self.tol_feas = tol_feas
        self.tol_kkt = tol_kkt
        self.tol_opt = tol_opt

    def fit(self, problem, y=None):
        self.problem_ = _as_problem(problem)
        self.report_ = analyze(
            self.problem_,
            n_starts=self.n_starts,
            seed=self.seed,
            tol_feas=self.tol_feas,
            tol_kkt=self.tol_kkt,
            tol_opt=self.tol_opt,
        )
        self.verdict_ = self.report_.verdict
        self.catalog_ = self.report_.catalog
        self.alternatives_ = self.report_.alternatives
        if self.verdict_ is Verdict.SOLUTION_EXISTS and len(self.alternatives_) >= 1:
            self.rule_ = build_scf(self.alternatives_)
        else:
            self.rule_ = None
        return self

    def predict(self, X) -> np.ndarray:
        """Aggregate the k choices in the rows of X into the social choice."""
        X = _check_points(self, X)
        if self.rule_ is None:
            raise ValueError(
                f"no aggregation rule is available: the verdict is {self.verdict_.value}"
            )
        return self.rule_(X)
