"""
Exception hierarchy for the SlimEdge optimizer.

Every error raised on purpose by this package derives from SlimEdgeError so
front ends can catch one type. Validation errors additionally derive from
ValueError and name the offending field.
"""

from typing import Optional


class SlimEdgeError(Exception):
    """Root of all SlimEdge errors."""


class ClusterValidationError(SlimEdgeError, ValueError):
    """A ClusterSpec invariant does not hold."""

    def __init__(self, message: str, field: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class DuplicateView(ClusterValidationError):
    pass


class MissingView(ClusterValidationError):
    pass


class NonPositivePerf(ClusterValidationError):
    pass


class NonPositiveMemory(ClusterValidationError):
    pass


class ImportanceNotNormalized(ClusterValidationError):
    pass


class AccuracyFloorAboveBase(ClusterValidationError):
    pass


class OutOfRangePruning(SlimEdgeError, ValueError):
    """A pruning fraction lies outside [0, 0.99]."""


class InfeasibleCap(SlimEdgeError):
    """A memory cap is below 1% of the base model size."""

    def __init__(self, view: int, required: float, cap_mb: float, base_mb: float):
        super().__init__(
            f"device for view {view} needs pruning {required:.4f} > 0.99 "
            f"(cap {cap_mb} MB, base model {base_mb} MB)"
        )
        self.view = view
        self.required = required


class NonPositiveTime(SlimEdgeError, ValueError):
    pass


class UnknownSample(SlimEdgeError, KeyError):
    pass


class EmptyClass(SlimEdgeError, ValueError):
    pass


class InsufficientData(SlimEdgeError, ValueError):
    pass


class PopulationTooSmall(SlimEdgeError, ValueError):
    pass


class HyperparameterError(SlimEdgeError, ValueError):
    pass


class ConfigError(SlimEdgeError):
    """A configuration file or flag could not be parsed."""

    def __init__(
        self,
        message: str,
        source: Optional[str] = None,
        line: Optional[int] = None,
        column: Optional[int] = None,
        field: Optional[str] = None,
    ):
        location = source or "<config>"
        if line is not None:
            location += f":{line}"
            if column is not None:
                location += f":{column}"
        if field:
            location += f" [{field}]"
        super().__init__(f"{location}: {message}")
        self.source = source
        self.line = line
        self.column = column
        self.field = field
