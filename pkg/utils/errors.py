"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations

from typing import Any, Dict, Optional


class McastError(Exception):
    """Base class for every error raised by this package."""


class InstanceFormatError(McastError):
    """An instance or state document could not be parsed."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InstanceValidationError(McastError):
    """A parsed or generated instance violates a structural invariant."""

    def __init__(self, invariant: str, detail: str = ""):
        self.invariant = invariant
        super().__init__(f"{invariant}: {detail}" if detail else invariant)


class ParameterError(McastError, ValueError):
    """A generator or configuration parameter is out of range."""


class CapExceededError(McastError):
    """An exact oracle refused an input larger than its configured cap."""

    def __init__(self, what: str, size: int, cap: int):
        self.what = what
        self.size = size
        self.cap = cap
        super().__init__(f"{what} {size} exceeds cap {cap}")


class InvalidPathError(McastError):
    """A strategy is not a simple path from its terminal to the root."""


class UndefinedCostError(McastError):
    """A vertex cost was requested where the suffixes through it diverge."""

    def __init__(self, vertex: int):
        self.vertex = vertex
        super().__init__(f"cost of vertex {vertex} is undefined in this state")


class NotATreeError(McastError):
    """The scheduler was asked to work on a state whose paths do not form a tree."""


class LemmaViolation(McastError, AssertionError):
    """A runtime check of the dynamics failed.

    ``check`` names the failed check and ``snapshot`` carries enough of the
    state to reproduce the failure offline.
    """

    def __init__(self, check: str, detail: str = "", snapshot: Optional[Dict[str, Any]] = None):
        self.check = check
        self.snapshot = snapshot or {}
        super().__init__(f"{check}: {detail}" if detail else check)


class NonImprovingMoveError(LemmaViolation):
    """A move that was expected to lower the potential did not."""

    def __init__(self, detail: str = "", snapshot: Optional[Dict[str, Any]] = None):
        super().__init__("non-improving-move", detail, snapshot)


class GuardExceededError(McastError):
    """The run applied more moves than the configured guard allows."""

    def __init__(self, guard: int, snapshot: Optional[Dict[str, Any]] = None):
        self.guard = guard
        self.snapshot = snapshot or {}
        super().__init__(f"iteration guard of {guard} moves exceeded")


class AuditFailure(McastError, AssertionError):
    """The post-hoc charging audit found a violated bound."""

    def __init__(self, check: str, detail: str = ""):
        self.check = check
        super().__init__(f"{check}: {detail}" if detail else check)


__all__ = [
    "AuditFailure",
    "CapExceededError",
    "GuardExceededError",
    "InstanceFormatError",
    "InstanceValidationError",
    "InvalidPathError",
    "LemmaViolation",
    "McastError",
    "NonImprovingMoveError",
    "NotATreeError",
    "ParameterError",
    "UndefinedCostError",
]
