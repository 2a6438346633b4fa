"""Training and evaluating classifiers under human label variation."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConvergenceError,
    HLVError,
    MethodCompatibilityError,
    TrainingError,
    UndefinedMetricError,
    ValidationError,
)
from .judgements import (  # noqa: E402
    AnnotationSet,
    HardAssignment,
    JudgementMatrix,
    LabelSpace,
    build_judgements,
    harden,
    read_annotations,
    read_judgements,
)

__all__ = [
    "AnnotationSet",
    "ConvergenceError",
    "HLVError",
    "HardAssignment",
    "JudgementMatrix",
    "LabelSpace",
    "MethodCompatibilityError",
    "TrainingError",
    "UndefinedMetricError",
    "ValidationError",
    "build_judgements",
    "harden",
    "read_annotations",
    "read_judgements",
]
