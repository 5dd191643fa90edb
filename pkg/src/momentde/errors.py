"""Exception hierarchy.

``ValidationError`` is raised for malformed inputs; every other subclass of
``MomentDEError`` signals a mathematical failure (singular data, missing
cyclic vector, ...). The CLI maps the two groups to different exit codes.
"""

from __future__ import annotations

from typing import Any


class MomentDEError(Exception):
    """Base class; ``details`` is a JSON-serializable diagnostic payload."""

    def __init__(self, msg: str, **details: Any) -> None:
        super().__init__(msg)
        self.details = details


class ValidationError(MomentDEError):
    """Input does not satisfy a documented precondition."""


class OutOfRangeError(MomentDEError):
    """A custom moment table was exhausted and has no extension rule."""


class OrderExhaustedError(MomentDEError):
    """Truncation order too small for the requested operation."""


class SingularAtOriginError(MomentDEError):
    """Series is not invertible because its value at 0 is singular."""


class NoCyclicVectorError(MomentDEError):
    """No cyclic vector was found for the constant part of the matrix."""


class ConditionViolationError(MomentDEError):
    """``v0 A0^j A_p != 0`` for some admissible ``(j, p)``."""
