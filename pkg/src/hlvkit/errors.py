"""Exception hierarchy shared across hlvkit."""


class HLVError(Exception):
    """Base class for every error raised by hlvkit."""


class ValidationError(HLVError, ValueError):
    """Input violates a structural invariant (shape, kind, arity, range)."""


class MethodCompatibilityError(ValidationError):
    """Training method cannot be applied to the given annotations."""


class UndefinedMetricError(HLVError, ArithmeticError):
    """Metric has no defined value for the inputs (e.g. zero variance)."""


class TrainingError(HLVError, RuntimeError):
    """Optimisation produced a non-finite loss or parameters."""


class ConvergenceError(HLVError, RuntimeError):
    """Iterative solver stopped before reaching its tolerance."""
