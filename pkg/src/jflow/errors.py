"""Exception hierarchy shared across the package."""

from __future__ import annotations


class JFlowError(Exception):
    """Base class for all laboratory errors."""


class ArgumentError(JFlowError, ValueError):
    """Bad argument (index or degree out of range, mismatched shapes)."""


class GeometryError(JFlowError, ValueError):
    """A form that should be positive (definite) is not.

    ``value`` carries the offending minimum eigenvalue (or other measured
    quantity) and ``where`` an optional grid index.
    """

    def __init__(self, message: str, value: float | None = None, where=None):
        super().__init__(message)
        self.value = value
        self.where = where


class PreconditionError(JFlowError):
    pass


class StiffnessError(JFlowError):
    """Step-size halving exhausted; ``last_state`` is the last admissible state."""

    def __init__(self, message: str, last_state=None):
        super().__init__(message)
        self.last_state = last_state


class NonConvergenceError(JFlowError):
    def __init__(self, message: str, last_iterate=None, history=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.history = history or []


class CalibrationError(JFlowError):
    pass


class ScenarioError(JFlowError):
    pass


class ConfigError(JFlowError):
    """Invalid configuration; ``field`` and ``line`` locate the problem."""

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        super().__init__(message)
        self.field = field
        self.line = line

    def __str__(self) -> str:
        loc = []
        if self.line is not None:
            loc.append(f"line {self.line}")
        if self.field is not None:
            loc.append(f"field '{self.field}'")
        prefix = ", ".join(loc)
        return f"{prefix}: {self.args[0]}" if prefix else self.args[0]


class LedgerFormatError(JFlowError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
