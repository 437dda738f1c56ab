"""Exception hierarchy shared by the kernels, the runner and the grammars."""


class LpSpaceError(Exception):
    """Base exception for every failure raised by this package."""


# ── Domain and parameters ────────────────────────────────────

class DomainError(LpSpaceError):
    """Evaluation point outside [0, 1]."""


class UnboundedPointError(DomainError):
    """Pointwise value is +inf (e.g. the log exponent at t = 0)."""


class PoleError(LpSpaceError):
    """Dual exponent evaluated where p(t) = 1."""


class ParameterError(LpSpaceError, ValueError):
    """Constructor or operation parameter out of range."""


class NotMeasurePreservingError(ParameterError):
    """Cell permutation does not preserve Lebesgue measure."""


class UnsupportedVariantError(LpSpaceError):
    """Operation is not defined for this exponent or function variant."""


class UnboundedFunctionError(LpSpaceError):
    """Function is unbounded where a bounded one is required."""


# ── Numerical outcomes ───────────────────────────────────────

class InconclusiveError(LpSpaceError):
    """A three-valued oracle could neither certify finiteness nor divergence."""

    def __init__(self, message: str, reason: str = "budget"):
        super().__init__(message)
        self.reason = reason


class QuadratureOverflowError(LpSpaceError):
    """Integral is finite but exceeds the float range."""

    def __init__(self, message: str, lower_bound: float = float("inf")):
        super().__init__(message)
        self.lower_bound = lower_bound


class ConsistencyError(LpSpaceError):
    """Two independent computations of the same quantity disagree."""


class PreconditionError(LpSpaceError):
    """Operation called on inputs that violate its precondition."""


# ── Configuration and reporting ──────────────────────────────

class ConfigError(LpSpaceError):
    """Experiment configuration is invalid."""

    def __init__(self, message: str, field: str = "", line: int | None = None):
        super().__init__(message)
        self.field = field
        self.line = line


class GrammarError(ConfigError):
    """Exponent, function or functional spec text does not parse."""


class ReportError(LpSpaceError):
    """Report bundle could not be written."""
