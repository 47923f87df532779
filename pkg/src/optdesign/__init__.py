"""Solvability analysis for social choice over equality-constrained alternatives.

Given constraints g_i(p) = c_i on R^n plus an objective constraint
g_m(p) = c_m, the library decides whether the resulting alternative set can
carry an anonymous, unanimous, continuous aggregation rule: it enumerates the
critical points of the objective over the feasible set, checks whether the
target level is optimal, certifies nondegeneracy, and (when the alternative
set is finite) builds the highest-label rule.  A level-set retraction flow
and a linear perturbation repair round out the toolkit.
"""

from .analysis import (
    AnalysisReport,
    Classification,
    Verdict,
    analyze,
    classify_c,
)
from .critical import (
    CriticalCatalog,
    LagrangianPoint,
    bordered_hessian,
    kkt_residual,
    morse_certify,
    solve_critical_points,
)
from .errors import (
    ConstraintQualificationError,
    DomainError,
    EmptyCatalogError,
    ExpressionError,
    FlowError,
    MorseRepairError,
    OptDesignError,
    ParseError,
    ProjectionError,
    SchemaError,
    UnknownAlternativeError,
)
from .estimators import (
    CriticalPointFinder,
    LevelSetRetractor,
    ManifoldProjector,
    SolvabilityAnalyzer,
)
from .expressions import Expression, parse
from .flow import (
    FlowConfig,
    RetractionResult,
    Trajectory,
    integrate_flow,
    integrate_flow_many,
    level_field,
    projected_gradient,
    retract_to_level,
    trajectory_to_csv,
)
from .manifold import (
    ConstraintProblem,
    FeasiblePoint,
    RankReport,
    check_cq,
    jacobian_y,
    load_problem,
    problem_from_dict,
    problem_from_strings,
    problem_to_dict,
    project_to_y,
    residual,
    save_problem,
    with_target,
)
from .perturb import Perturbation, RepairResult, linear_perturb, morse_repair
from .scf import (
    AxiomAudit,
    FiniteAlternatives,
    HighestLabelRule,
    audit_rule,
    build_scf,
    scf_axiom_audit,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisReport",
    "AxiomAudit",
    "Classification",
    "ConstraintProblem",
    "ConstraintQualificationError",
    "CriticalCatalog",
    "CriticalPointFinder",
    "DomainError",
    "EmptyCatalogError",
    "Expression",
    "ExpressionError",
    "FeasiblePoint",
    "FiniteAlternatives",
    "FlowConfig",
    "FlowError",
    "HighestLabelRule",
    "LagrangianPoint",
    "LevelSetRetractor",
    "ManifoldProjector",
    "MorseRepairError",
    "OptDesignError",
    "ParseError",
    "Perturbation",
    "ProjectionError",
    "RankReport",
    "RepairResult",
    "RetractionResult",
    "SchemaError",
    "SolvabilityAnalyzer",
    "Trajectory",
    "UnknownAlternativeError",
    "Verdict",
    "analyze",
    "audit_rule",
    "bordered_hessian",
    "build_scf",
    "check_cq",
    "classify_c",
    "integrate_flow",
    "integrate_flow_many",
    "jacobian_y",
    "kkt_residual",
    "level_field",
    "linear_perturb",
    "load_problem",
    "morse_certify",
    "morse_repair",
    "parse",
    "problem_from_dict",
    "problem_from_strings",
    "problem_to_dict",
    "project_to_y",
    "projected_gradient",
    "residual",
    "retract_to_level",
    "save_problem",
    "scf_axiom_audit",
    "solve_critical_points",
    "trajectory_to_csv",
    "with_target",
]
