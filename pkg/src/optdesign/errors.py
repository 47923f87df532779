"""Exception types shared across the package."""


class OptDesignError(Exception):
    """Base class for all errors raised by this package."""


class ExpressionError(OptDesignError):
    """Base class for expression parsing and evaluation errors."""


class ParseError(ExpressionError):
    """Syntax error in an expression source string."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class UnknownIdentifierError(ParseError):
    """An identifier that is neither a declared variable nor a known function."""

    def __init__(self, token: str, position: int):
        super().__init__(f"unknown identifier '{token}'", position)
        self.token = token


class NonSmoothFunctionError(ParseError):
    """A function name that is recognized but not smooth (abs, floor, ...)."""

    def __init__(self, token: str, position: int):
        super().__init__(f"non-smooth function '{token}' is not allowed", position)
        self.token = token


class DomainError(ExpressionError):
    """Evaluation left the natural domain (log/sqrt of nonpositive, division by zero)."""

    def __init__(self, message: str, subexpression: str):
        super().__init__(f"{message} in '{subexpression}'")
        self.subexpression = subexpression


class SchemaError(OptDesignError):
    """A problem file or report artifact does not match the documented schema."""


class ProjectionError(OptDesignError):
    """Gauss-Newton projection onto the feasible set failed."""

    def __init__(self, message: str, residual_norm: float, rank_deficient: bool = False):
        super().__init__(message)
        self.residual_norm = residual_norm
        self.rank_deficient = rank_deficient


class ConstraintQualificationError(OptDesignError):
    """The constraint Jacobian is rank deficient where full rank is required."""


class EmptyCatalogError(OptDesignError):
    """No critical points were found, so range classification is impossible."""


class FlowError(OptDesignError):
    """A flow trajectory or retraction could not reach its target."""

    def __init__(self, message: str, final_value: float | None = None):
        super().__init__(message)
        self.final_value = final_value


class MorseRepairError(OptDesignError):
    """Every perturbation attempt failed to produce a nondegenerate catalog."""

    def __init__(self, message: str, diagnostics: list):
        super().__init__(message)
        self.diagnostics = diagnostics


class UnknownAlternativeError(OptDesignError):
    """An aggregation-rule input does not match any labeled alternative."""
